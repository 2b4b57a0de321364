//! State predicates accepted by `--pred` and `--invariant`.
//!
//! Either a keyword (`dead`, `live`, `welldef`) or a linear constraint over
//! the marking such as `p0 + p7 + p8 <= 1` or `p1 + 2*p6 + p3 + p5 == 10`.

use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use rwpt::{PlaceId, SystemState};

pub type Predicate = Arc<dyn Fn(&SystemState) -> bool + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cmp {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
    Ne,
}

impl Cmp {
    fn holds(self, lhs: i128, rhs: i128) -> bool {
        match self {
            Cmp::Le => lhs <= rhs,
            Cmp::Lt => lhs < rhs,
            Cmp::Ge => lhs >= rhs,
            Cmp::Gt => lhs > rhs,
            Cmp::Eq => lhs == rhs,
            Cmp::Ne => lhs != rhs,
        }
    }
}

pub fn parse_predicate(text: &str) -> Result<Predicate> {
    let text = text.trim();
    match text {
        "dead" => return Ok(Arc::new(|s: &SystemState| s.is_dead())),
        "live" => return Ok(Arc::new(|s: &SystemState| !s.is_dead())),
        "welldef" => return Ok(Arc::new(|s: &SystemState| s.is_well_defined())),
        _ => {}
    }
    // two-character operators first
    let ops = [("<=", Cmp::Le), (">=", Cmp::Ge), ("==", Cmp::Eq), ("!=", Cmp::Ne), ("<", Cmp::Lt), (">", Cmp::Gt)];
    let (pos, len, cmp) = ops
        .iter()
        .find_map(|&(sym, c)| text.find(sym).map(|i| (i, sym.len(), c)))
        .ok_or_else(|| anyhow!("unknown predicate {text:?}; expected dead, live, welldef or a linear constraint"))?;
    let lhs = &text[..pos];
    let rhs: i128 = text[pos + len..]
        .trim()
        .parse()
        .with_context(|| format!("right-hand side of {text:?} must be an integer"))?;
    let mut terms: Vec<(i128, PlaceId)> = Vec::new();
    for term in lhs.split('+') {
        let term = term.trim();
        if term.is_empty() {
            bail!("empty term in {text:?}");
        }
        let (k, place) = match term.split_once('*') {
            Some((k, pl)) => (k.trim().parse::<i128>().with_context(|| format!("bad coefficient in {term:?}"))?, pl),
            None => (1, term),
        };
        let place: PlaceId = place.parse().with_context(|| format!("bad place in {term:?}"))?;
        terms.push((k, place));
    }
    Ok(Arc::new(move |s: &SystemState| {
        let lhs: i128 = terms
            .iter()
            .map(|&(k, pl)| k * s.marking().lookup(pl) as i128)
            .sum();
        cmp.holds(lhs, rhs)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rwpt::fms::{fms_initial, FmsParams};

    #[test]
    fn keywords_and_constraints() {
        let s = fms_initial(FmsParams::new(3)).unwrap();
        assert!(!parse_predicate("dead").unwrap()(&s));
        assert!(parse_predicate("live").unwrap()(&s));
        assert!(parse_predicate("welldef").unwrap()(&s));
        assert!(parse_predicate("p0 + p7 + p8 <= 1").unwrap()(&s));
        assert!(parse_predicate("p1 == 6").unwrap()(&s));
        assert!(!parse_predicate("2*p1 < 12").unwrap()(&s));
        assert!(parse_predicate("p9 != 1").unwrap()(&s));
        assert!(parse_predicate("sideways").is_err());
        assert!(parse_predicate("p1 <= x").is_err());
        assert!(parse_predicate("q1 <= 2").is_err());
    }
}
