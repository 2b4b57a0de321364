//! Guarded reconfiguration rules over whole systems, and the base net
//! transformations (arc weight get/set, place and transition removal) that
//! rule bodies are built from.
//!
//! A rule is an explicit match enumerator: its matcher scans a state and
//! lists every binding of the rule's variables, the guard filters them and
//! the transform builds the successor. Targets are always canonicalized, so a
//! transform may produce an empty (undefined) net; what happens then is
//! decided by [`UndefinedPolicy`] or by wrapping the rule with [`wrap_valid`].

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::bag::{BagError, Multiplicity};
use crate::net::{ArcTriple, Net, PlaceBag, PlaceId, SystemState, TranId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error(transparent)]
    Bag(#[from] BagError),
    #[error("rule {rule} with binding {{{binding}}} produced an undefined state from {source_state}")]
    UndefinedTarget {
        rule: String,
        binding: Binding,
        source_state: String,
    },
}

/// What to do when a rule rewrites a well-defined state into one with an
/// empty net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UndefinedPolicy {
    /// Report the offending rule, binding and source state.
    #[default]
    Error,
    /// Silently drop the application.
    Filter,
}

/// Value bound to a rule variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bound {
    Place(PlaceId),
    Tran(TranId),
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Place(x) => x.fmt(f),
            Bound::Tran(x) => x.fmt(f),
        }
    }
}

/// Named assignments of places and transitions to rule variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Binding {
    vars: Vec<(String, Bound)>,
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn place(mut self, name: &str, value: PlaceId) -> Self {
        self.vars.push((name.to_string(), Bound::Place(value)));
        self
    }

    pub fn tran(mut self, name: &str, value: TranId) -> Self {
        self.vars.push((name.to_string(), Bound::Tran(value)));
        self
    }

    pub fn get(&self, name: &str) -> Option<Bound> {
        self.vars.iter().find(|(n, _)| n == name).map(|&(_, b)| b)
    }

    /// Panics if `name` is unbound or not a place: a matcher/transform
    /// disagreement is a programming error in the rule.
    pub fn place_of(&self, name: &str) -> PlaceId {
        match self.get(name) {
            Some(Bound::Place(x)) => x,
            other => panic!("rule variable {name} is not a bound place: {other:?}"),
        }
    }

    pub fn tran_of(&self, name: &str) -> TranId {
        match self.get(name) {
            Some(Bound::Tran(x)) => x,
            other => panic!("rule variable {name} is not a bound transition: {other:?}"),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Bound)> + '_ {
        self.vars.iter().map(|(n, b)| (n.as_str(), *b))
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (n, b)) in self.vars.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{n}={b}")?;
        }
        Ok(())
    }
}

pub type Matcher = dyn Fn(&SystemState) -> Vec<Binding> + Send + Sync;
pub type Guard = dyn Fn(&SystemState, &Binding) -> bool + Send + Sync;
pub type Transform = dyn Fn(&SystemState, &Binding) -> Result<SystemState, RewriteError> + Send + Sync;

/// A named, guarded transformation of systems.
#[derive(Clone)]
pub struct RewriteRule {
    name: Arc<str>,
    matcher: Arc<Matcher>,
    guard: Arc<Guard>,
    transform: Arc<Transform>,
    validated: bool,
}

impl fmt::Debug for RewriteRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RewriteRule")
            .field("name", &self.name)
            .field("validated", &self.validated)
            .finish()
    }
}

impl RewriteRule {
    pub fn new<M, G, T>(name: &str, matcher: M, guard: G, transform: T) -> Self
    where
        M: Fn(&SystemState) -> Vec<Binding> + Send + Sync + 'static,
        G: Fn(&SystemState, &Binding) -> bool + Send + Sync + 'static,
        T: Fn(&SystemState, &Binding) -> Result<SystemState, RewriteError> + Send + Sync + 'static,
    {
        RewriteRule {
            name: name.into(),
            matcher: Arc::new(matcher),
            guard: Arc::new(guard),
            transform: Arc::new(transform),
            validated: false,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    /// Every guard-passing application, undefined targets included unless
    /// the rule is validated.
    pub fn applications(&self, state: &SystemState) -> Result<Vec<RuleApplication>, RewriteError> {
        let mut out = Vec::new();
        for binding in (self.matcher)(state) {
            if !(self.guard)(state, &binding) {
                continue;
            }
            let produced = (self.transform)(state, &binding)?;
            let target = SystemState::with_shared_net(Arc::clone(produced.shared_net()), produced.marking().clone());
            if self.validated && !target.is_well_defined() {
                continue;
            }
            out.push(RuleApplication {
                rule: Arc::clone(&self.name),
                binding,
                source: state.clone(),
                target,
            });
        }
        Ok(out)
    }
}

/// One rewrite step `source ->r(binding) target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleApplication {
    pub rule: Arc<str>,
    pub binding: Binding,
    pub source: SystemState,
    pub target: SystemState,
}

/// All applications of `rule` to `state`; undefined targets are handled per
/// `policy`.
pub fn apply_rule(
    rule: &RewriteRule,
    state: &SystemState,
    policy: UndefinedPolicy,
) -> Result<Vec<RuleApplication>, RewriteError> {
    let apps = rule.applications(state)?;
    match policy {
        UndefinedPolicy::Filter => Ok(apps.into_iter().filter(|a| a.target.is_well_defined()).collect()),
        UndefinedPolicy::Error => {
            if let Some(bad) = apps.iter().find(|a| !a.target.is_well_defined()) {
                return Err(RewriteError::UndefinedTarget {
                    rule: rule.name().to_string(),
                    binding: bad.binding.clone(),
                    source_state: state.to_string(),
                });
            }
            Ok(apps)
        }
    }
}

/// The same rule, additionally requiring every target to be well-defined.
pub fn wrap_valid(rule: &RewriteRule) -> RewriteRule {
    RewriteRule {
        validated: true,
        ..rule.clone()
    }
}

/// Which of the three arc bags of a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArcKind {
    Input,
    Output,
    Inhibitor,
}

/// Weight of the `(tr, place)` arc of the given kind; `None` when `tr` is
/// not in the net.
pub fn arc_weight(net: &Net, tr: TranId, place: PlaceId, kind: ArcKind) -> Option<Multiplicity> {
    let q = net.get(tr)?;
    Some(match kind {
        ArcKind::Input => q.input.lookup(place),
        ArcKind::Output => q.output.lookup(place),
        ArcKind::Inhibitor => q.inhibitor.lookup(place),
    })
}

/// Sets an arc weight (zero removes the arc). A missing transition is
/// created for input and output arcs and ignored for inhibitor arcs. The
/// result is normalized and may be empty.
pub fn set_arc(net: &Net, tr: TranId, place: PlaceId, kind: ArcKind, weight: Multiplicity) -> Net {
    let updated = match (net.get(tr), kind) {
        (None, ArcKind::Input) => net.with_entry(
            tr,
            ArcTriple::new(PlaceBag::singleton(place, weight), PlaceBag::nil(), PlaceBag::nil()),
        ),
        (None, ArcKind::Output) => net.with_entry(
            tr,
            ArcTriple::new(PlaceBag::nil(), PlaceBag::singleton(place, weight), PlaceBag::nil()),
        ),
        (None, ArcKind::Inhibitor) => net.clone(),
        (Some(q), kind) => {
            let mut q = q.clone();
            match kind {
                ArcKind::Input => q.input = q.input.set_mult(place, weight),
                ArcKind::Output => q.output = q.output.set_mult(place, weight),
                ArcKind::Inhibitor => q.inhibitor = q.inhibitor.set_mult(place, weight),
            }
            net.with_entry(tr, q)
        }
    };
    updated.normalize()
}

/// [`set_arc`], falling back to the original net when the edit would leave
/// it empty.
pub fn set_arc_safe(net: &Net, tr: TranId, place: PlaceId, kind: ArcKind, weight: Multiplicity) -> Net {
    let edited = set_arc(net, tr, place, kind, weight);
    if edited.is_empty() {
        net.clone()
    } else {
        edited
    }
}

/// Zeroes `place` in every triple, then normalizes.
pub fn remove_place(net: &Net, place: PlaceId) -> Net {
    Net::from_entries(net.iter().map(|(tr, q)| (tr, q.remove_place(place))))
        .expect("keys are unique")
        .normalize()
}

pub fn remove_transition(net: &Net, tr: TranId) -> Net {
    net.without(tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bag::Bag;
    use crate::fms::fms_net;
    use crate::net::tests::{arb_bag, arb_net};
    use crate::net::{p, t};
    use proptest::prelude::*;

    fn bag(pairs: &[(u32, u64)]) -> PlaceBag {
        Bag::from_pairs(pairs.iter().map(|&(i, k)| (p(i), k))).unwrap()
    }

    fn tri(i: &[(u32, u64)], o: &[(u32, u64)], h: &[(u32, u64)]) -> ArcTriple {
        ArcTriple::new(bag(i), bag(o), bag(h))
    }

    fn single(q: ArcTriple) -> Net {
        Net::from_entries([(t(1), q)]).unwrap()
    }

    /// Merges `T -> [I, 1.P, nil]` and `T' -> [1.P, O, nil]` through an
    /// empty intermediate place that nothing else touches.
    pub(crate) fn aggregation_rule() -> RewriteRule {
        RewriteRule::new(
            "aggregate",
            |s| {
                let mut out = Vec::new();
                for (a, qa) in s.net().iter() {
                    for (b, qb) in s.net().iter() {
                        if a == b || !qa.inhibitor.is_empty() || !qb.inhibitor.is_empty() {
                            continue;
                        }
                        let (Some((pa, 1)), Some((pb, 1))) = (qa.output.iter().next(), qb.input.iter().next()) else {
                            continue;
                        };
                        if qa.output.support_len() == 1 && qb.input.support_len() == 1 && pa == pb {
                            out.push(Binding::new().tran("T", a).tran("T'", b).place("P", pa));
                        }
                    }
                }
                out
            },
            |s, b| {
                let (q, place) = (s.net().get(b.tran_of("T")).unwrap(), b.place_of("P"));
                let o = &s.net().get(b.tran_of("T'")).unwrap().output;
                q.input.lookup(place) == 0 && o.lookup(place) == 0 && s.marking().lookup(place) == 0
            },
            |s, b| {
                let (ta, tb) = (b.tran_of("T"), b.tran_of("T'"));
                let merged = ArcTriple::new(
                    s.net().get(ta).unwrap().input.clone(),
                    s.net().get(tb).unwrap().output.clone(),
                    PlaceBag::nil(),
                );
                let net = s.net().without(tb).with_entry(ta, merged);
                Ok(SystemState::new(net, s.marking().clone()))
            },
        )
    }

    fn two_cycle() -> SystemState {
        let net = Net::from_entries([
            (t(1), tri(&[(1, 1)], &[(2, 1)], &[])),
            (t(2), tri(&[(2, 1)], &[(1, 1)], &[])),
        ])
        .unwrap();
        SystemState::new(net, PlaceBag::nil())
    }

    #[test]
    fn aggregation_hits_undefined_state() {
        let s = two_cycle();
        let raw = aggregation_rule().applications(&s).unwrap();
        assert!(!raw.is_empty());
        assert!(raw.iter().all(|a| !a.target.is_well_defined()));
        assert!(matches!(
            apply_rule(&aggregation_rule(), &s, UndefinedPolicy::Error),
            Err(RewriteError::UndefinedTarget { .. })
        ));
        assert!(apply_rule(&aggregation_rule(), &s, UndefinedPolicy::Filter)
            .unwrap()
            .is_empty());
        let valid = wrap_valid(&aggregation_rule());
        assert!(valid.is_validated());
        assert!(apply_rule(&valid, &s, UndefinedPolicy::Error).unwrap().is_empty());
    }

    #[test]
    fn wrap_valid_without_matches() {
        let none = RewriteRule::new("none", |_| Vec::new(), |_, _| true, |s, _| Ok(s.clone()));
        let s = crate::fms::fms_initial(crate::fms::FmsParams::new(2)).unwrap();
        assert!(apply_rule(&wrap_valid(&none), &s, UndefinedPolicy::Error).unwrap().is_empty());
    }

    #[test]
    fn arc_weight_lookups() {
        let net = fms_net();
        assert_eq!(arc_weight(&net, t(0), p(1), ArcKind::Input), Some(2));
        assert_eq!(arc_weight(&net, t(1), p(7), ArcKind::Inhibitor), Some(1));
        assert_eq!(arc_weight(&net, t(0), p(7), ArcKind::Output), Some(0));
        assert_eq!(arc_weight(&net, t(9), p(1), ArcKind::Input), None);
    }

    #[test]
    fn set_arc_cases() {
        let edited = set_arc(&fms_net(), t(0), p(9), ArcKind::Input, 1);
        assert_eq!(edited.input_of(t(0)), Some(&bag(&[(1, 2), (9, 1)])));
        assert_eq!(set_arc(&Net::empty(), t(1), p(1), ArcKind::Inhibitor, 3), Net::empty());
        let created = set_arc(&Net::empty(), t(2), p(1), ArcKind::Output, 2);
        assert_eq!(created.get(t(2)), Some(&tri(&[], &[(1, 2)], &[])));
        let n = single(tri(&[(1, 1)], &[(2, 1)], &[]));
        assert_eq!(
            set_arc(&n, t(1), p(2), ArcKind::Output, 0),
            single(tri(&[(1, 1)], &[], &[]))
        );
    }

    #[test]
    fn set_arc_safe_cases() {
        let fms = fms_net();
        assert_eq!(
            set_arc_safe(&fms, t(0), p(9), ArcKind::Input, 1),
            set_arc(&fms, t(0), p(9), ArcKind::Input, 1)
        );
        // the edit makes input equal output, so the only transition vanishes
        let m = single(tri(&[(1, 1), (2, 1)], &[(1, 1)], &[]));
        assert!(set_arc(&m, t(1), p(2), ArcKind::Output, 1).is_empty());
        assert_eq!(set_arc_safe(&m, t(1), p(2), ArcKind::Output, 1), m);
    }

    #[test]
    fn removals() {
        let n = single(tri(&[(1, 1), (2, 1)], &[(3, 1)], &[]));
        assert_eq!(remove_place(&n, p(2)), single(tri(&[(1, 1)], &[(3, 1)], &[])));
        let fms = fms_net();
        let without = remove_transition(&fms, t(6));
        assert_eq!(without.len(), 6);
        assert!(without.get(t(6)).is_none());
        let collapsing = single(tri(&[(1, 1)], &[(1, 1), (2, 1)], &[]));
        assert!(remove_place(&collapsing, p(2)).is_empty());
    }

    fn arb_kind() -> impl Strategy<Value = ArcKind> {
        prop::sample::select(vec![ArcKind::Input, ArcKind::Output, ArcKind::Inhibitor])
    }

    proptest! {
        #[test]
        fn set_arc_round_trips(net in arb_net(4, 4), tr in 0u32..5, pl in 0u32..5, kind in arb_kind(), w in 0u64..4) {
            let edited = set_arc(&net, t(tr), p(pl), kind, w);
            let recorded = net.get(t(tr)).is_some() || kind != ArcKind::Inhibitor;
            if recorded && edited.get(t(tr)).is_some() {
                prop_assert_eq!(arc_weight(&edited, t(tr), p(pl), kind), Some(w));
            }
            prop_assert!(edited.is_normalized());
        }

        #[test]
        fn wrapped_rules_only_emit_well_defined_states(net in arb_net(4, 4), m in arb_bag(4, 2)) {
            let s = SystemState::new(net, m);
            prop_assume!(s.is_well_defined());
            let rules = [wrap_valid(&aggregation_rule()), wrap_valid(&crate::fms::rule_r3())];
            for r in &rules {
                for app in apply_rule(r, &s, UndefinedPolicy::Error).unwrap() {
                    prop_assert!(app.target.is_well_defined());
                }
            }
        }

        #[test]
        fn application_is_pure(net in arb_net(4, 4), m in arb_bag(4, 2)) {
            let s = SystemState::new(net, m);
            let r = aggregation_rule();
            let a = r.applications(&s).unwrap();
            let b = r.applications(&s).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
