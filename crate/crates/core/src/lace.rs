//! Interval graphs on `[a, b]`, laces, compatible edges and the J factors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::walk::{Memory, Walk};

/// The edge `st`, `s < t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Edge {
    pub s: u32,
    pub t: u32,
}

impl Edge {
    pub fn new(s: u32, t: u32) -> Result<Self> {
        if s >= t {
            return Err(Error::InvalidArgument(format!("edge needs s < t, got {s} {t}")));
        }
        Ok(Edge { s, t })
    }

    pub fn len(&self) -> u32 {
        self.t - self.s
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.s, self.t)
    }
}

/// A set of edges on `[a, b]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalGraph {
    pub a: u32,
    pub b: u32,
    pub edges: BTreeSet<Edge>,
}

impl IntervalGraph {
    pub fn new(a: u32, b: u32, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        if a >= b {
            return Err(Error::InvalidArgument(format!("interval needs a < b, got [{a}, {b}]")));
        }
        let edges: BTreeSet<Edge> = edges.into_iter().collect();
        if let Some(e) = edges.iter().find(|e| e.s < a || e.t > b) {
            return Err(Error::InvalidArgument(format!("edge {e} outside [{a}, {b}]")));
        }
        Ok(IntervalGraph { a, b, edges })
    }

    pub fn from_pairs(a: u32, b: u32, pairs: &[(u32, u32)]) -> Result<Self> {
        let edges = pairs.iter().map(|&(s, t)| Edge::new(s, t)).collect::<Result<Vec<_>>>()?;
        Self::new(a, b, edges)
    }

    /// Connectivity asks for `union (s, t) = (a, b)` with open intervals, so
    /// every interior point must lie strictly inside an edge. Returns the
    /// first point that does not (or `a` when `b = a + 1` has no edge).
    pub fn first_gap(&self) -> Option<u32> {
        if self.b == self.a + 1 {
            let whole = Edge { s: self.a, t: self.b };
            return (!self.edges.contains(&whole)).then_some(self.a);
        }
        (self.a + 1..self.b).find(|&j| !self.edges.iter().any(|e| e.s < j && j < e.t))
    }

    pub fn is_connected(&self) -> bool {
        self.first_gap().is_none()
    }
}

/// An ordered list of edges `s_1 t_1, ..., s_N t_N` on `[a, b]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Lace {
    pub a: u32,
    pub b: u32,
    pub edges: Vec<Edge>,
}

impl Lace {
    pub fn order(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, e: &Edge) -> bool {
        self.edges.contains(e)
    }

    pub fn graph(&self) -> IntervalGraph {
        IntervalGraph {
            a: self.a,
            b: self.b,
            edges: self.edges.iter().copied().collect(),
        }
    }
}

impl fmt::Display for Lace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.edges.iter().map(|e| format!("({},{})", e.s, e.t)).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// The defining inequalities of a lace with every edge no longer than tau.
pub fn is_valid_lace(l: &Lace, tau: Memory) -> bool {
    let e = &l.edges;
    let n = e.len();
    if n == 0 || l.a >= l.b {
        return false;
    }
    if e.iter().any(|x| x.s >= x.t || !tau.covers(x.len())) {
        return false;
    }
    if e[0].s != l.a || e[n - 1].t != l.b {
        return false;
    }
    if n == 1 {
        return true;
    }
    if e[1].s <= l.a {
        return false;
    }
    for i in 0..n - 1 {
        if e[i + 1].s >= e[i].t {
            return false;
        }
        if i + 2 < n && e[i].t > e[i + 2].s {
            return false;
        }
    }
    e[n - 2].t < e[n - 1].t
}

/// The lace `L_G` of a connected graph.
pub fn lace_from_graph(g: &IntervalGraph) -> Result<Lace> {
    let mut t = g
        .edges
        .iter()
        .filter(|e| e.s == g.a)
        .map(|e| e.t)
        .max()
        .ok_or(Error::Disconnected { gap: g.a })?;
    let mut edges = vec![Edge { s: g.a, t }];
    while t < g.b {
        let next = g.edges.iter().filter(|e| e.s < t).map(|e| e.t).max().unwrap_or(t);
        if next <= t {
            return Err(Error::Disconnected { gap: t });
        }
        let s = g
            .edges
            .iter()
            .filter(|e| e.t == next)
            .map(|e| e.s)
            .min()
            .expect("edge ending at next");
        edges.push(Edge { s, t: next });
        t = next;
    }
    Ok(Lace { a: g.a, b: g.b, edges })
}

/// All laces with `n_edges` edges on `[a, b]`, in lexicographic order of
/// `(s_1, t_1, s_2, t_2, ...)`.
pub fn enumerate_laces(n_edges: usize, tau: Memory, a: u32, b: u32) -> Vec<Lace> {
    let mut out = Vec::new();
    if n_edges == 0 || a >= b {
        return out;
    }
    let mut cur = Vec::with_capacity(n_edges);
    for t1 in a + 1..=b {
        if !tau.covers(t1 - a) {
            break;
        }
        cur.push(Edge { s: a, t: t1 });
        extend(&mut cur, n_edges, tau, a, b, &mut out);
        cur.pop();
    }
    out
}

fn extend(cur: &mut Vec<Edge>, n_edges: usize, tau: Memory, a: u32, b: u32, out: &mut Vec<Lace>) {
    let last = *cur.last().unwrap();
    if cur.len() == n_edges {
        if last.t == b {
            out.push(Lace {
                a,
                b,
                edges: cur.clone(),
            });
        }
        return;
    }
    if last.t == b {
        return;
    }
    let s_lo = if cur.len() >= 2 { cur[cur.len() - 2].t } else { a + 1 };
    for s in s_lo..last.t {
        for t in last.t + 1..=b {
            if !tau.covers(t - s) {
                break;
            }
            cur.push(Edge { s, t });
            extend(cur, n_edges, tau, a, b, out);
            cur.pop();
        }
    }
}

/// Edges `st` not in `L`, of length `<= tau`, whose addition leaves the lace
/// unchanged.
pub fn compatible_edges(l: &Lace, tau: Memory) -> Vec<Edge> {
    let mut out = Vec::new();
    let mut g = l.graph();
    for s in l.a..l.b {
        for t in s + 1..=l.b {
            let e = Edge { s, t };
            if !tau.covers(e.len()) || l.contains(&e) {
                continue;
            }
            g.edges.insert(e);
            if matches!(lace_from_graph(&g), Ok(ref x) if x == l) {
                out.push(e);
            }
            g.edges.remove(&e);
        }
    }
    out
}

/// `prod_{st in L} (-U_st) prod_{st in C(L)} (1 + U_st)` on `w`, which is
/// 0 or 1. `w` is indexed from time `a`.
pub fn j_factor(w: &Walk, l: &Lace, tau: Memory) -> Result<u8> {
    let compatible = compatible_edges(l, tau);
    j_factor_with(w, l, &compatible)
}

/// As [`j_factor`] with the compatible edges precomputed.
pub fn j_factor_with(w: &Walk, l: &Lace, compatible: &[Edge]) -> Result<u8> {
    if w.len() as u32 != l.b - l.a {
        return Err(Error::LengthMismatch {
            walk: w.len(),
            lace: (l.b - l.a) as usize,
        });
    }
    let at = |time: u32| w.site((time - l.a) as usize);
    for e in &l.edges {
        if at(e.s) != at(e.t) {
            return Ok(0);
        }
    }
    for e in compatible {
        if at(e.s) == at(e.t) {
            return Ok(0);
        }
    }
    Ok(1)
}

/// `J^(N)[0, |w|]` on `w`: the number of N-edge laces whose factor is 1.
pub fn j_total(w: &Walk, n_edges: usize, tau: Memory) -> u64 {
    let n = w.len() as u32;
    enumerate_laces(n_edges, tau, 0, n)
        .iter()
        .map(|l| j_factor(w, l, tau).expect("matching length") as u64)
        .sum()
}

/// Outcome of [`partition_check`].
#[derive(Clone, Debug, Serialize)]
pub struct PartitionCheck {
    pub tau: Memory,
    pub length: u32,
    pub connected_graphs: u64,
    pub laces: usize,
    pub mismatches: usize,
}

/// Runs the graph-to-lace map over every edge set on `[0, b]` and checks
/// that its image is exactly the enumerated laces, each image is a valid
/// fixed point, and each lace has `2^|C(L)|` preimages.
pub fn partition_check(tau: Memory, b: u32) -> Result<PartitionCheck> {
    let edges: Vec<Edge> = (0..b)
        .flat_map(|s| (s + 1..=b).map(move |t| Edge { s, t }))
        .filter(|e| tau.covers(e.len()))
        .collect();
    if b == 0 || edges.len() > 20 {
        return Err(Error::InvalidArgument(format!(
            "partition check needs 1 <= b and at most 20 edges, got b = {b} with {} edges",
            edges.len()
        )));
    }
    let mut preimages: BTreeMap<Lace, u64> = BTreeMap::new();
    let mut connected_graphs = 0;
    let mut mismatches = 0;
    for mask in 1u64..1 << edges.len() {
        let g = IntervalGraph {
            a: 0,
            b,
            edges: (0..edges.len()).filter(|i| mask >> i & 1 == 1).map(|i| edges[i]).collect(),
        };
        if let Ok(l) = lace_from_graph(&g) {
            connected_graphs += 1;
            if !is_valid_lace(&l, tau) || !matches!(lace_from_graph(&l.graph()), Ok(ref x) if *x == l) {
                mismatches += 1;
            }
            *preimages.entry(l).or_default() += 1;
        }
    }
    let enumerated: Vec<Lace> = (1..=b as usize).flat_map(|n| enumerate_laces(n, tau, 0, b)).collect();
    if enumerated.len() != preimages.len() || enumerated.iter().any(|l| !preimages.contains_key(l)) {
        mismatches += 1;
    }
    for (l, count) in &preimages {
        if *count != 1u64 << compatible_edges(l, tau).len() {
            mismatches += 1;
        }
    }
    Ok(PartitionCheck {
        tau,
        length: b,
        connected_graphs,
        laces: enumerated.len(),
        mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lace(a: u32, b: u32, pairs: &[(u32, u32)]) -> Lace {
        Lace {
            a,
            b,
            edges: pairs.iter().map(|&(s, t)| Edge { s, t }).collect(),
        }
    }

    #[test]
    fn construction_examples() {
        let g = IntervalGraph::from_pairs(0, 7, &[(0, 3), (2, 5), (4, 7)]).unwrap();
        assert_eq!(lace_from_graph(&g).unwrap(), lace(0, 7, &[(0, 3), (2, 5), (4, 7)]));
        let g = IntervalGraph::from_pairs(0, 6, &[(0, 2), (0, 4), (3, 6), (2, 6)]).unwrap();
        assert_eq!(lace_from_graph(&g).unwrap(), lace(0, 6, &[(0, 4), (2, 6)]));
    }

    #[test]
    fn disconnected_reports_gap() {
        let g = IntervalGraph::from_pairs(0, 6, &[(0, 2), (1, 3), (4, 6)]).unwrap();
        assert!(matches!(lace_from_graph(&g), Err(Error::Disconnected { gap: 3 })));
        assert_eq!(g.first_gap(), Some(3));
        let g = IntervalGraph::from_pairs(0, 4, &[(1, 4)]).unwrap();
        assert!(matches!(lace_from_graph(&g), Err(Error::Disconnected { gap: 0 })));
        // touching intervals leave the shared endpoint uncovered
        let g = IntervalGraph::from_pairs(0, 2, &[(0, 1), (1, 2)]).unwrap();
        assert!(!g.is_connected());
        assert!(matches!(lace_from_graph(&g), Err(Error::Disconnected { gap: 1 })));
    }

    #[test]
    fn single_edge_laces() {
        assert_eq!(enumerate_laces(1, Memory::Finite(4), 2, 6), vec![lace(2, 6, &[(2, 6)])]);
        assert!(enumerate_laces(1, Memory::Finite(3), 2, 6).is_empty());
        assert_eq!(enumerate_laces(2, Memory::Infinite, 0, 4).len(), 3);
    }

    #[test]
    fn compatibility_examples() {
        let l = lace(0, 6, &[(0, 4), (2, 6)]);
        let c = compatible_edges(&l, Memory::Infinite);
        assert!(c.contains(&Edge { s: 0, t: 2 }));
        assert!(!c.contains(&Edge { s: 0, t: 5 }));
    }

    #[test]
    fn partition_holds_on_short_intervals() {
        for tau in [Memory::Finite(2), Memory::Infinite] {
            for b in 1..=5 {
                assert_eq!(partition_check(tau, b).unwrap().mismatches, 0);
            }
        }
        assert!(partition_check(Memory::Infinite, 6).is_err());
    }

    #[test]
    fn j_factor_on_loops() {
        let l = lace(0, 2, &[(0, 2)]);
        assert_eq!(j_factor(&Walk::line(&[0, 1, 0]), &l, Memory::Infinite).unwrap(), 1);
        assert_eq!(j_factor(&Walk::line(&[0, 1, 2]), &l, Memory::Infinite).unwrap(), 0);
        assert!(j_factor(&Walk::line(&[0, 1]), &l, Memory::Infinite).is_err());
    }
}
