//! The fault-tolerant manufacturing system benchmark.
//!
//! Places: `p0` fault-free token, `p1` raw pieces, `p2`/`p3` pieces queued on
//! line 1/2, `p4`/`p5` pieces worked by line 1/2, `p6` assembled products,
//! `p7`/`p8` line 1/2 broken. Transitions: `t0` loader, `t1`/`t2` line
//! machines (inhibited by their fault place), `t3` assembler, `t4` unloader,
//! `t5`/`t6` fault occurrences.
//!
//! Rule `r1` switches the nominal net to the degraded single-line
//! configuration when a fault has occurred and the faulty line holds no
//! worked piece. Rule `r2` restores the nominal net once the degraded system
//! deadlocks. Rule `r3` (off by default) blocks the loader with a fresh
//! empty input place.

use thiserror::Error;

use crate::bag::{Bag, Multiplicity};
use crate::net::{p, t, ArcTriple, Net, PlaceBag, PlaceId, SystemState};
use crate::rewrite::{set_arc, ArcKind, Binding, RewriteError, RewriteRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FmsParams {
    /// Half the number of raw pieces.
    pub m: Multiplicity,
    pub enable_r3: bool,
}

impl FmsParams {
    pub fn new(m: Multiplicity) -> Self {
        FmsParams { m, enable_r3: false }
    }

    pub fn with_r3(mut self, on: bool) -> Self {
        self.enable_r3 = on;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FmsError {
    #[error("parameter M must be at least 1")]
    ZeroM,
    #[error("parameter M = {0} is too large")]
    TooLarge(Multiplicity),
}

/// A production line of the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Line {
    One,
    Two,
}

fn unit(place: PlaceId) -> PlaceBag {
    PlaceBag::singleton(place, 1)
}

fn bag(pairs: &[(u32, Multiplicity)]) -> PlaceBag {
    Bag::from_pairs(pairs.iter().map(|&(i, k)| (p(i), k))).expect("small constant bag")
}

fn triple(input: PlaceBag, output: PlaceBag, inhibitor: PlaceBag) -> ArcTriple {
    ArcTriple::new(input, output, inhibitor)
}

/// The seven-transition nominal net.
pub fn fms_net() -> Net {
    Net::from_entries([
        (t(0), triple(bag(&[(1, 2)]), bag(&[(2, 1), (3, 1)]), PlaceBag::nil())),
        (t(1), triple(unit(p(2)), unit(p(4)), unit(p(7)))),
        (t(2), triple(unit(p(3)), unit(p(5)), unit(p(8)))),
        (t(3), triple(bag(&[(4, 1), (5, 1)]), unit(p(6)), PlaceBag::nil())),
        (t(4), triple(unit(p(6)), bag(&[(1, 2)]), PlaceBag::nil())),
        (t(5), triple(unit(p(0)), unit(p(7)), PlaceBag::nil())),
        (t(6), triple(unit(p(0)), unit(p(8)), PlaceBag::nil())),
    ])
    .expect("distinct transition keys")
}

/// The degraded net in which only `working` still runs, as produced by `r1`.
pub fn faulty_net(working: Line) -> Net {
    let (queue, worked, machine, fault_tr) = match working {
        Line::One => (p(2), p(4), t(1), t(5)),
        Line::Two => (p(3), p(5), t(2), t(6)),
    };
    let nominal = fms_net();
    Net::from_entries([
        (t(0), triple(unit(p(1)), unit(queue), PlaceBag::nil())),
        (machine, nominal.get(machine).unwrap().clone()),
        (t(3), triple(PlaceBag::singleton(worked, 2), unit(p(6)), PlaceBag::nil())),
        (t(4), nominal.get(t(4)).unwrap().clone()),
        (fault_tr, nominal.get(fault_tr).unwrap().clone()),
    ])
    .expect("distinct transition keys")
}

/// `(fms_net(), 2M*p1 + 1*p0)`.
pub fn fms_initial(params: FmsParams) -> Result<SystemState, FmsError> {
    if params.m == 0 {
        return Err(FmsError::ZeroM);
    }
    let raw = params.m.checked_mul(2).ok_or(FmsError::TooLarge(params.m))?;
    Ok(SystemState::new(fms_net(), bag(&[(1, raw), (0, 1)])))
}

/// `r1` and `r2`, plus `r3` when enabled.
pub fn fms_rules(params: FmsParams) -> Vec<RewriteRule> {
    let mut rules = vec![rule_r1(), rule_r2(params.m)];
    if params.enable_r3 {
        rules.push(rule_r3());
    }
    rules
}

/// The two entries of a bag made of two distinct unit terms, in both orders.
fn unit_pairs(b: &PlaceBag) -> Option<[(PlaceId, PlaceId); 2]> {
    let mut it = b.iter();
    match (it.next(), it.next(), it.next()) {
        (Some((x, 1)), Some((y, 1)), None) => Some([(x, y), (y, x)]),
        _ => None,
    }
}

fn unit_element(b: &PlaceBag) -> Option<PlaceId> {
    let mut it = b.iter();
    match (it.next(), it.next()) {
        (Some((x, 1)), None) => Some(x),
        _ => None,
    }
}

fn r1_bindings(s: &SystemState) -> Vec<Binding> {
    let net = s.net();
    let (Some(q0), Some(q3)) = (net.get(t(0)), net.get(t(3))) else {
        return Vec::new();
    };
    if q0.input != bag(&[(1, 2)]) || !q0.inhibitor.is_empty() {
        return Vec::new();
    }
    if q3.output != unit(p(6)) || !q3.inhibitor.is_empty() {
        return Vec::new();
    }
    let (Some(outs), Some(ins)) = (unit_pairs(&q0.output), unit_pairs(&q3.input)) else {
        return Vec::new();
    };
    let mut found = Vec::new();
    for (p2, p3) in outs {
        for (p4, p5) in ins {
            for (tf, qf) in net.iter() {
                if tf == t(0) || tf == t(3) || qf.input != unit(p(0)) || !qf.inhibitor.is_empty() {
                    continue;
                }
                let Some(pf) = unit_element(&qf.output) else {
                    continue;
                };
                if s.marking().lookup(pf) < 1 {
                    continue;
                }
                let expected = triple(unit(p3), unit(p5), unit(pf));
                for (tl, ql) in net.iter() {
                    if tl == t(0) || tl == t(3) || tl == tf || *ql != expected {
                        continue;
                    }
                    found.push(
                        Binding::new()
                            .place("P2", p2)
                            .place("P3", p3)
                            .place("P4", p4)
                            .place("P5", p5)
                            .place("PF", pf)
                            .tran("TF", tf)
                            .tran("TL", tl),
                    );
                }
            }
        }
    }
    found
}

fn r1_rest(s: &SystemState, b: &Binding) -> PlaceBag {
    s.marking().diff(&unit(b.place_of("PF")))
}

/// nominal => faulty, for a fault on either line.
pub fn rule_r1() -> RewriteRule {
    RewriteRule::new(
        "r1",
        r1_bindings,
        |s, b| r1_rest(s, b).lookup(b.place_of("P5")) == 0,
        |s, b| {
            let (p2, p3, p4) = (b.place_of("P2"), b.place_of("P3"), b.place_of("P4"));
            let net = s
                .net()
                .without(b.tran_of("TF"))
                .without(b.tran_of("TL"))
                .with_entry(t(0), triple(unit(p(1)), unit(p2), PlaceBag::nil()))
                .with_entry(t(3), triple(PlaceBag::singleton(p4, 2), unit(p(6)), PlaceBag::nil()));
            let rest = r1_rest(s, b);
            let marking = rest
                .set_mult(p3, 0)
                .sum(&PlaceBag::singleton(p2, rest.lookup(p3)))?
                .sum(&unit(p(0)))?;
            Ok(SystemState::new(net, marking))
        },
    )
}

/// faulty => nominal, once the degraded system is dead. `M` raw pieces move
/// from the working line's queue to the restored one.
pub fn rule_r2(m: Multiplicity) -> RewriteRule {
    RewriteRule::new(
        "r2",
        |s| {
            let Some(p2) = s.net().output_of(t(0)).and_then(unit_element) else {
                return Vec::new();
            };
            let nominal_out = fms_net().output_of(t(0)).cloned().unwrap_or_default();
            unit_pairs(&nominal_out)
                .into_iter()
                .flatten()
                .filter(|&(first, _)| first == p2)
                .map(|(p2, p3)| Binding::new().place("P2", p2).place("P3", p3))
                .collect()
        },
        |s, _| s.is_dead(),
        move |s, b| {
            let (p2, p3) = (b.place_of("P2"), b.place_of("P3"));
            // S + 1.p0 + M.P3 - M.P2 - 1.p7 - 1.p8, differences left to right
            let marking = s
                .marking()
                .sum(&unit(p(0)))?
                .sum(&PlaceBag::singleton(p3, m))?
                .diff(&PlaceBag::singleton(p2, m))
                .diff(&unit(p(7)))
                .diff(&unit(p(8)));
            Ok(SystemState::new(fms_net(), marking))
        },
    )
}

/// Disables the loader by linking a fresh empty input place `p9` to `t0`.
pub fn rule_r3() -> RewriteRule {
    RewriteRule::new(
        "r3",
        |_| vec![Binding::new()],
        |s, _| {
            s.marking().lookup(p(0)) == 0 && s.marking().lookup(p(9)) == 0 && !s.net().contains_place(p(9))
        },
        |s, _| -> Result<SystemState, RewriteError> {
            let net = set_arc(s.net(), t(0), p(9), ArcKind::Input, 1);
            Ok(SystemState::new(net, s.marking().clone()))
        },
    )
}
