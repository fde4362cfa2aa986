//! Brute-force oracles written without touching the library's own search,
//! lace or convolution code. Everything here is exponential and only meant
//! for tiny cases.
#![allow(dead_code)]

use std::collections::BTreeMap;

use lacewalk::{Memory, Site, StepDistribution};
use num_rational::BigRational;
use num_traits::{One, Zero};

pub type Table = BTreeMap<Vec<i32>, BigRational>;

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn covers(tau: Memory, gap: usize) -> bool {
    match tau {
        Memory::Infinite => true,
        Memory::Finite(t) => gap <= t as usize,
    }
}

/// Every n-step walk from the origin with its weight at p = 1, as
/// `(positions, weight)`.
pub fn all_walks(d: &StepDistribution, n: usize) -> Vec<(Vec<Vec<i32>>, BigRational)> {
    let steps: Vec<Vec<i32>> = d.steps().iter().map(|s| s.0.clone()).collect();
    let masses = d.masses();
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let mut pos = vec![vec![0i32; d.dim()]];
        let mut w = BigRational::one();
        for &i in &idx {
            let last = pos.last().unwrap();
            pos.push(last.iter().zip(&steps[i]).map(|(a, b)| a + b).collect());
            w *= &masses[i];
        }
        out.push((pos, w));
        // odometer
        let mut k = 0;
        loop {
            if k == n {
                return out;
            }
            idx[k] += 1;
            if idx[k] < steps.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Pairs `(s, t)`, `0 < t - s <= tau`, at which the walk revisits a site.
pub fn coincidences(pos: &[Vec<i32>], tau: Memory) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for s in 0..pos.len() {
        for t in s + 1..pos.len() {
            if covers(tau, t - s) && pos[s] == pos[t] {
                e.push((s, t));
            }
        }
    }
    e
}

pub fn brute_two_point(d: &StepDistribution, tau: Memory, n: usize) -> Table {
    let mut t = Table::new();
    for (pos, w) in all_walks(d, n) {
        if coincidences(&pos, tau).is_empty() {
            *t.entry(pos[n].clone()).or_insert_with(BigRational::zero) += w;
        }
    }
    t
}

/// `union (s, t) = (a, b)` over open intervals: each unit piece and each
/// interior integer point must be covered.
pub fn is_connected(a: usize, b: usize, g: &[(usize, usize)]) -> bool {
    let pieces = (a..b).all(|j| g.iter().any(|&(s, t)| s <= j && j < t));
    let points = (a + 1..b).all(|j| g.iter().any(|&(s, t)| s < j && j < t));
    pieces && points
}

/// The lace of a connected graph, straight from its definition:
/// `t_1 = max{t : (a,t) in G}`, then `t_{i+1} = max{t : (s,t) in G, s < t_i}`
/// with `s_{i+1} = min{s : (s, t_{i+1}) in G}`.
pub fn graph_lace(a: usize, b: usize, g: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let t1 = g.iter().filter(|e| e.0 == a).map(|e| e.1).max().unwrap();
    let mut lace = vec![(a, t1)];
    let mut t = t1;
    while t < b {
        let tn = g.iter().filter(|e| e.0 < t).map(|e| e.1).max().unwrap();
        let sn = g.iter().filter(|e| e.1 == tn).map(|e| e.0).min().unwrap();
        lace.push((sn, tn));
        t = tn;
    }
    lace
}

fn subsets<T: Copy>(items: &[T]) -> impl Iterator<Item = Vec<T>> + '_ {
    (0u64..1 << items.len()).map(move |mask| {
        items
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &x)| x)
            .collect()
    })
}

/// `J^(N)[0, n]` on one walk for every N, as the signed sum over connected
/// subgraphs of its coincidence graph grouped by lace size:
/// `J^(N) = (-1)^N sum_{G : |L_G| = N} (-1)^{|G|}`.
pub fn j_by_graphs(pos: &[Vec<i32>], tau: Memory) -> BTreeMap<usize, i64> {
    let n = pos.len() - 1;
    let edges = coincidences(pos, tau);
    let mut out = BTreeMap::new();
    for g in subsets(&edges) {
        if g.is_empty() || !is_connected(0, n, &g) {
            continue;
        }
        let order = graph_lace(0, n, &g).len();
        let sign = if (g.len() + order) % 2 == 0 { 1 } else { -1 };
        *out.entry(order).or_insert(0) += sign;
    }
    out
}

/// `sum_G (-1)^{|G|}` over all connected subgraphs, no lace involved.
pub fn connected_graph_sum(pos: &[Vec<i32>], tau: Memory) -> i64 {
    let n = pos.len() - 1;
    let edges = coincidences(pos, tau);
    subsets(&edges)
        .filter(|g| !g.is_empty() && is_connected(0, n, g))
        .map(|g| if g.len() % 2 == 0 { 1 } else { -1 })
        .sum()
}

/// `pi^(N)_n` at p = 1 by summing `W(w) J^(N)(w)` over all walks.
pub fn brute_pi(d: &StepDistribution, tau: Memory, n: usize) -> BTreeMap<usize, Table> {
    let mut out: BTreeMap<usize, Table> = BTreeMap::new();
    for (pos, w) in all_walks(d, n) {
        for (order, j) in j_by_graphs(&pos, tau) {
            if j != 0 {
                let e = out.entry(order).or_default().entry(pos[n].clone()).or_insert_with(BigRational::zero);
                *e += &w * BigRational::from_integer(j.into());
            }
        }
    }
    for t in out.values_mut() {
        t.retain(|_, v| !v.is_zero());
    }
    out.retain(|_, t| !t.is_empty());
    out
}

/// Laces from the defining inequalities, by scanning all N-subsets of
/// admissible edges on `[a, b]`.
pub fn brute_laces(n_edges: usize, tau: Memory, a: usize, b: usize) -> Vec<Vec<(usize, usize)>> {
    let mut all = Vec::new();
    for s in a..b {
        for t in s + 1..=b {
            if covers(tau, t - s) {
                all.push((s, t));
            }
        }
    }
    let mut out = Vec::new();
    let mut pick = Vec::new();
    choose(&all, 0, n_edges, &mut pick, &mut |e: &[(usize, usize)]| {
        let mut e = e.to_vec();
        e.sort();
        if lace_inequalities(&e, a, b) {
            out.push(e);
        }
    });
    out.sort();
    out
}

fn choose<F: FnMut(&[(usize, usize)])>(
    all: &[(usize, usize)],
    from: usize,
    left: usize,
    pick: &mut Vec<(usize, usize)>,
    f: &mut F,
) {
    if left == 0 {
        f(pick);
        return;
    }
    for i in from..all.len() {
        pick.push(all[i]);
        choose(all, i + 1, left - 1, pick, f);
        pick.pop();
    }
}

/// `a = s_1 < s_2`, `s_{i+1} < t_i <= s_{i+2}`, `t_{N-1} < t_N = b`.
fn lace_inequalities(e: &[(usize, usize)], a: usize, b: usize) -> bool {
    let n = e.len();
    if e[0].0 != a || e[n - 1].1 != b {
        return false;
    }
    for i in 0..n {
        if i + 1 < n && !(e[i + 1].0 < e[i].1 && e[i].1 < e[i + 1].1 && e[i].0 < e[i + 1].0) {
            return false;
        }
        if i + 2 < n && e[i].1 > e[i + 2].0 {
            return false;
        }
    }
    true
}

pub fn site(c: &[i32]) -> Site {
    Site(c.to_vec())
}

/// Nonzero exact entries of a field keyed by coordinates.
pub fn table_of(f: &lacewalk::LatticeField) -> Table {
    f.exact_entries()
        .expect("exact field")
        .iter()
        .filter(|(_, v)| !v.is_zero())
        .map(|(s, v)| (s.0.clone(), v.clone()))
        .collect()
}

pub fn without_zeros(mut t: Table) -> Table {
    t.retain(|_, v| !v.is_zero());
    t
}
