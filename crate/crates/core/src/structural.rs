//! Incidence matrix, minimal P-/T-semiflows and structural boundedness.
//!
//! Semiflows are computed with the Farkas row-combination procedure: start
//! from `[C | I]`, eliminate one column of `C` at a time by pairing rows of
//! opposite sign, and prune every row whose support (in the identity part)
//! contains the support of another row. What survives after the last column
//! is the set of minimal-support semiflows.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::net::{Net, PlaceBag, PlaceId, TranId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructuralError {
    #[error("integer overflow while combining semiflow rows")]
    Overflow,
}

/// `Q[p, t] = O(t)(p) - I(t)(p)` over the places mentioned by the net.
/// Inhibitor arcs contribute nothing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    pub places: Vec<PlaceId>,
    pub transitions: Vec<TranId>,
    /// Row-major, one row per place.
    pub entries: Vec<Vec<i64>>,
}

impl IncidenceMatrix {
    pub fn get(&self, place: PlaceId, tr: TranId) -> Option<i64> {
        let r = self.places.binary_search(&place).ok()?;
        let c = self.transitions.binary_search(&tr).ok()?;
        Some(self.entries[r][c])
    }

    fn transpose(&self) -> Vec<Vec<i64>> {
        (0..self.transitions.len())
            .map(|c| self.entries.iter().map(|row| row[c]).collect())
            .collect()
    }
}

pub fn incidence(net: &Net) -> IncidenceMatrix {
    let places = net.places();
    let transitions: Vec<TranId> = net.transitions().collect();
    let entries = places
        .iter()
        .map(|&pl| {
            net.iter()
                .map(|(_, q)| q.output.lookup(pl) as i64 - q.input.lookup(pl) as i64)
                .collect()
        })
        .collect();
    IncidenceMatrix {
        places,
        transitions,
        entries,
    }
}

/// A node of a semiflow's support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Place(PlaceId),
    Tran(TranId),
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Place(x) => x.fmt(f),
            Node::Tran(x) => x.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SemiflowKind {
    P,
    T,
}

/// Non-negative annihilating vector with coprime positive weights on its
/// support.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Semiflow {
    pub kind: SemiflowKind,
    pub weights: BTreeMap<Node, u64>,
}

impl Semiflow {
    pub fn support(&self) -> impl Iterator<Item = Node> + '_ {
        self.weights.keys().copied()
    }

    pub fn weight(&self, node: Node) -> u64 {
        self.weights.get(&node).copied().unwrap_or(0)
    }
}

/// Table notation, e.g. `p1 + 2*p2 + 2*p4 + 2*p6`.
impl fmt::Display for Semiflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (node, w)) in self.weights.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            if *w == 1 {
                write!(f, "{node}")?;
            } else {
                write!(f, "{w}*{node}")?;
            }
        }
        Ok(())
    }
}

/// Minimal P-semiflows `y` with `y . Q = 0`.
pub fn p_semiflows(q: &IncidenceMatrix) -> Result<Vec<Semiflow>, StructuralError> {
    let nodes: Vec<Node> = q.places.iter().map(|&x| Node::Place(x)).collect();
    farkas(&q.entries, q.transitions.len(), &nodes, SemiflowKind::P)
}

/// Minimal T-semiflows `x` with `Q . x = 0`.
pub fn t_semiflows(q: &IncidenceMatrix) -> Result<Vec<Semiflow>, StructuralError> {
    let nodes: Vec<Node> = q.transitions.iter().map(|&x| Node::Tran(x)).collect();
    farkas(&q.transpose(), q.places.len(), &nodes, SemiflowKind::T)
}

#[derive(Clone)]
struct Row {
    residual: Vec<i64>,
    combo: Vec<i64>,
}

impl Row {
    fn support_subset(&self, other: &Row) -> bool {
        self.combo
            .iter()
            .zip(&other.combo)
            .all(|(&a, &b)| a == 0 || b != 0)
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn normalize_row(row: &mut Row) {
    let g = row
        .residual
        .iter()
        .chain(&row.combo)
        .fold(0, |g, &v| gcd(g, v));
    if g > 1 {
        row.residual.iter_mut().chain(row.combo.iter_mut()).for_each(|v| *v /= g);
    }
}

fn combine(a: &Row, b: &Row, col: usize) -> Result<Row, StructuralError> {
    // a[col] > 0 > b[col]
    let (ka, kb) = (-b.residual[col], a.residual[col]);
    let g = gcd(ka, kb);
    let (ka, kb) = (ka / g, kb / g);
    let mix = |x: &[i64], y: &[i64]| -> Result<Vec<i64>, StructuralError> {
        x.iter()
            .zip(y)
            .map(|(&u, &v)| {
                u.checked_mul(ka)
                    .and_then(|s| v.checked_mul(kb).and_then(|t| s.checked_add(t)))
                    .ok_or(StructuralError::Overflow)
            })
            .collect()
    };
    let mut row = Row {
        residual: mix(&a.residual, &b.residual)?,
        combo: mix(&a.combo, &b.combo)?,
    };
    normalize_row(&mut row);
    Ok(row)
}

fn farkas(
    matrix: &[Vec<i64>],
    cols: usize,
    nodes: &[Node],
    kind: SemiflowKind,
) -> Result<Vec<Semiflow>, StructuralError> {
    let n = nodes.len();
    let mut rows: Vec<Row> = (0..n)
        .map(|i| {
            let mut combo = vec![0; n];
            combo[i] = 1;
            Row {
                residual: matrix[i].clone(),
                combo,
            }
        })
        .collect();
    for col in 0..cols {
        let (mut pos, mut neg, mut zero) = (Vec::new(), Vec::new(), Vec::new());
        for row in rows {
            match row.residual[col].signum() {
                1 => pos.push(row),
                -1 => neg.push(row),
                _ => zero.push(row),
            }
        }
        let mut next = zero;
        for a in &pos {
            for b in &neg {
                next.push(combine(a, b, col)?);
            }
        }
        rows = prune(next);
    }
    let mut flows: Vec<Semiflow> = rows
        .into_iter()
        .map(|row| Semiflow {
            kind,
            weights: row
                .combo
                .iter()
                .enumerate()
                .filter(|(_, &w)| w != 0)
                .map(|(i, &w)| (nodes[i], w as u64))
                .collect(),
        })
        .collect();
    flows.sort_by(|a, b| a.support().cmp(b.support()));
    Ok(flows)
}

/// Drops duplicate rows and rows whose support strictly contains another's.
fn prune(mut rows: Vec<Row>) -> Vec<Row> {
    rows.sort_by(|a, b| a.combo.cmp(&b.combo));
    rows.dedup_by(|a, b| a.combo == b.combo);
    let keep: Vec<bool> = (0..rows.len())
        .map(|i| {
            !rows.iter().enumerate().any(|(j, other)| {
                j != i && other.support_subset(&rows[i]) && !rows[i].support_subset(other)
            })
        })
        .collect();
    let mut kept: Vec<Row> = rows.into_iter().zip(keep).filter(|(_, k)| *k).map(|(r, _)| r).collect();
    // equal supports: keep one representative (they are proportional)
    let mut out: Vec<Row> = Vec::with_capacity(kept.len());
    for row in kept.drain(..) {
        if !out.iter().any(|o| o.support_subset(&row) && row.support_subset(o)) {
            out.push(row);
        }
    }
    out
}

/// Every place of the net lies in the support of some P-semiflow.
pub fn covered_by_p_semiflows(net: &Net) -> Result<bool, StructuralError> {
    let q = incidence(net);
    let flows = p_semiflows(&q)?;
    Ok(q
        .places
        .iter()
        .all(|&pl| flows.iter().any(|y| y.weight(Node::Place(pl)) > 0)))
}

/// `sum_p y(p) * m(p)` for a P-semiflow; transitions in `y` are ignored.
pub fn invariant_value(y: &Semiflow, marking: &PlaceBag) -> u128 {
    y.weights
        .iter()
        .filter_map(|(node, &w)| match node {
            Node::Place(pl) => Some(w as u128 * marking.lookup(*pl) as u128),
            Node::Tran(_) => None,
        })
        .sum()
}

/// Builds a semiflow from `(node, weight)` pairs; zero weights are dropped.
pub fn semiflow<I: IntoIterator<Item = (Node, u64)>>(kind: SemiflowKind, weights: I) -> Semiflow {
    Semiflow {
        kind,
        weights: weights.into_iter().filter(|&(_, w)| w > 0).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bag::Bag;
    use crate::fms::{faulty_net, fms_net, Line};
    use crate::net::tests::arb_net;
    use crate::net::{p, t, ArcTriple};
    use proptest::prelude::*;

    fn bag(pairs: &[(u32, u64)]) -> PlaceBag {
        Bag::from_pairs(pairs.iter().map(|&(i, k)| (p(i), k))).unwrap()
    }

    fn pflow(pairs: &[(u32, u64)]) -> Semiflow {
        semiflow(SemiflowKind::P, pairs.iter().map(|&(i, w)| (Node::Place(p(i)), w)))
    }

    #[test]
    fn incidence_entries() {
        let q = incidence(&fms_net());
        assert_eq!(q.get(p(1), t(0)), Some(-2));
        assert_eq!(q.get(p(7), t(5)), Some(1));
        assert_eq!(q.get(p(7), t(1)), Some(0));
        assert_eq!(q.places.len(), 9);
        assert_eq!(q.transitions.len(), 7);
    }

    #[test]
    fn chain_semiflow() {
        let net = Net::from_entries([(t(1), ArcTriple::new(bag(&[(1, 1)]), bag(&[(2, 1)]), PlaceBag::nil()))]).unwrap();
        let flows = p_semiflows(&incidence(&net)).unwrap();
        assert_eq!(flows, vec![pflow(&[(1, 1), (2, 1)])]);
        assert!(t_semiflows(&incidence(&net)).unwrap().is_empty());
    }

    #[test]
    fn growing_place_is_not_covered() {
        let net = Net::from_entries([(t(1), ArcTriple::new(bag(&[(1, 1)]), bag(&[(1, 2)]), PlaceBag::nil()))]).unwrap();
        assert!(!covered_by_p_semiflows(&net).unwrap());
    }

    #[test]
    fn invariant_values() {
        assert_eq!(invariant_value(&pflow(&[(0, 1), (8, 1)]), &PlaceBag::nil()), 0);
        let y = pflow(&[(1, 1), (6, 2), (3, 1), (5, 1)]);
        assert_eq!(invariant_value(&y, &bag(&[(1, 10), (6, 20), (3, 30), (5, 20), (8, 1)])), 100);
    }

    #[test]
    fn display_uses_table_notation() {
        assert_eq!(pflow(&[(6, 2), (1, 1), (2, 2), (4, 2)]).to_string(), "p1 + 2*p2 + 2*p4 + 2*p6");
        let tf = semiflow(SemiflowKind::T, [(Node::Tran(t(0)), 2), (Node::Tran(t(3)), 1)]);
        assert_eq!(tf.to_string(), "2*t0 + t3");
    }

    #[test]
    fn faulty_line_one_mirrors_line_two() {
        let flows = p_semiflows(&incidence(&faulty_net(Line::One))).unwrap();
        assert!(flows.contains(&pflow(&[(1, 1), (6, 2), (2, 1), (4, 1)])));
        assert!(flows.contains(&pflow(&[(0, 1), (7, 1)])));
    }

    /// All minimal-support semiflows with weights <= `bound`, by enumeration.
    fn brute_force(matrix: &[Vec<i64>], cols: usize, bound: u64) -> Vec<Vec<u64>> {
        let n = matrix.len();
        let mut sols: Vec<Vec<u64>> = Vec::new();
        let mut v = vec![0u64; n];
        loop {
            let mut i = 0;
            while i < n && v[i] == bound {
                v[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
            v[i] += 1;
            let ok = (0..cols).all(|c| (0..n).map(|r| v[r] as i64 * matrix[r][c]).sum::<i64>() == 0);
            if ok {
                sols.push(v.clone());
            }
        }
        let support = |x: &Vec<u64>| x.iter().map(|&w| w > 0).collect::<Vec<_>>();
        let strictly_inside = |a: &[bool], b: &[bool]| a.iter().zip(b).all(|(&x, &y)| !x || y) && a != b;
        let mut minimal: Vec<Vec<u64>> = sols
            .iter()
            .filter(|x| !sols.iter().any(|y| strictly_inside(&support(y), &support(x))))
            .filter(|x| x.iter().fold(0, |g, &w| gcd(g, w as i64)) == 1)
            .cloned()
            .collect();
        minimal.sort();
        minimal.dedup();
        minimal
    }

    fn as_vectors(flows: &[Semiflow], nodes: &[Node]) -> Vec<Vec<u64>> {
        let mut out: Vec<Vec<u64>> = flows.iter().map(|f| nodes.iter().map(|&n| f.weight(n)).collect()).collect();
        out.sort();
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn farkas_matches_brute_force(net in arb_net(4, 4)) {
            let q = incidence(&net);
            prop_assume!(!q.places.is_empty() && q.places.len() <= 5 && q.transitions.len() <= 5);
            let pf = p_semiflows(&q).unwrap();
            prop_assume!(pf.iter().all(|f| f.weights.values().all(|&w| w <= 8)));
            let nodes: Vec<Node> = q.places.iter().map(|&x| Node::Place(x)).collect();
            prop_assert_eq!(as_vectors(&pf, &nodes), brute_force(&q.entries, q.transitions.len(), 8));

            let tf = t_semiflows(&q).unwrap();
            prop_assume!(tf.iter().all(|f| f.weights.values().all(|&w| w <= 8)));
            let tnodes: Vec<Node> = q.transitions.iter().map(|&x| Node::Tran(x)).collect();
            prop_assert_eq!(as_vectors(&tf, &tnodes), brute_force(&q.transpose(), q.places.len(), 8));
        }

        #[test]
        fn semiflows_annihilate_and_are_minimal(net in arb_net(5, 5)) {
            let q = incidence(&net);
            let pf = p_semiflows(&q).unwrap();
            for y in &pf {
                prop_assert!(!y.weights.is_empty());
                prop_assert_eq!(y.weights.values().fold(0, |g, &w| gcd(g, w as i64)), 1);
                for (c, _) in q.transitions.iter().enumerate() {
                    let dot: i64 = q.places.iter().enumerate()
                        .map(|(r, &pl)| y.weight(Node::Place(pl)) as i64 * q.entries[r][c]).sum();
                    prop_assert_eq!(dot, 0);
                }
            }
            for a in &pf {
                for b in &pf {
                    if a != b {
                        prop_assert!(!a.support().all(|n| b.weight(n) > 0));
                    }
                }
            }
            let tf = t_semiflows(&q).unwrap();
            for x in &tf {
                for (r, _) in q.places.iter().enumerate() {
                    let dot: i64 = q.transitions.iter().enumerate()
                        .map(|(c, &tr)| x.weight(Node::Tran(tr)) as i64 * q.entries[r][c]).sum();
                    prop_assert_eq!(dot, 0);
                }
            }
        }
    }
}
