mod common;

use std::collections::BTreeSet;

use common::*;
use lacewalk::lace::{compatible_edges, enumerate_laces, j_total, lace_from_graph};
use lacewalk::pi::pi_coefficient;
use lacewalk::walk::two_point_tables;
use lacewalk::{Budget, Edge, IntervalGraph, Memory, StepDistribution, Walk};
use num_rational::BigRational;
use std::collections::BTreeMap;

const TAUS: [Memory; 4] = [Memory::Finite(1), Memory::Finite(2), Memory::Finite(3), Memory::Infinite];

fn lace_pairs(l: &lacewalk::Lace) -> Vec<(usize, usize)> {
    l.edges.iter().map(|e| (e.s as usize, e.t as usize)).collect()
}

#[test]
fn two_point_matches_full_enumeration() {
    let budget = Budget::default();
    for (dim, n_max) in [(1, 9), (2, 4)] {
        let d = StepDistribution::uniform_box(dim, 1).unwrap();
        for tau in TAUS {
            let tables = two_point_tables(&d, tau, n_max, &budget).unwrap();
            for n in 0..=n_max {
                assert_eq!(
                    table_of(&tables[n].values),
                    without_zeros(brute_two_point(&d, tau, n)),
                    "d={dim} tau={tau} n={n}"
                );
            }
        }
    }
}

#[test]
fn two_point_with_unequal_masses() {
    let mut masses = BTreeMap::new();
    masses.insert(site(&[-1]), rat(1, 3));
    masses.insert(site(&[1]), rat(1, 3));
    masses.insert(site(&[-2]), rat(1, 6));
    masses.insert(site(&[2]), rat(1, 6));
    let d = StepDistribution::from_masses(1, 2, masses).unwrap();
    let budget = Budget::default();
    for tau in [Memory::Finite(2), Memory::Finite(4), Memory::Infinite] {
        let tables = two_point_tables(&d, tau, 6, &budget).unwrap();
        for n in 0..=6 {
            assert_eq!(table_of(&tables[n].values), without_zeros(brute_two_point(&d, tau, n)));
        }
    }
}

#[test]
fn lace_enumeration_matches_inequality_scan() {
    for tau in TAUS {
        for b in 1..=7usize {
            for n_edges in 1..=b {
                let ours: Vec<_> = enumerate_laces(n_edges, tau, 0, b as u32).iter().map(lace_pairs).collect();
                assert_eq!(ours, brute_laces(n_edges, tau, 0, b), "tau={tau} [0,{b}] N={n_edges}");
            }
        }
        // a shifted interval
        for n_edges in 1..=4 {
            let ours: Vec<_> = enumerate_laces(n_edges, tau, 3, 8).iter().map(lace_pairs).collect();
            assert_eq!(ours, brute_laces(n_edges, tau, 3, 8));
        }
    }
}

/// Every lace is the lace of some connected graph and vice versa, and the
/// graphs with lace L are exactly L plus subsets of its compatible edges.
#[test]
fn laces_are_images_of_connected_graphs() {
    for tau in [Memory::Finite(2), Memory::Finite(3), Memory::Infinite] {
        for b in 1..=5u32 {
            let mut all = Vec::new();
            for s in 0..b {
                for t in s + 1..=b {
                    if tau.covers(t - s) {
                        all.push((s, t));
                    }
                }
            }
            let mut images: BTreeMap<Vec<(usize, usize)>, BTreeSet<Vec<(u32, u32)>>> = BTreeMap::new();
            for mask in 1u64..1 << all.len() {
                let g: Vec<(u32, u32)> = (0..all.len()).filter(|i| mask >> i & 1 == 1).map(|i| all[i]).collect();
                let gu: Vec<(usize, usize)> = g.iter().map(|&(s, t)| (s as usize, t as usize)).collect();
                let ig = IntervalGraph::from_pairs(0, b, &g).unwrap();
                if !is_connected(0, b as usize, &gu) {
                    assert!(lace_from_graph(&ig).is_err());
                    continue;
                }
                let lace = lace_from_graph(&ig).unwrap();
                assert_eq!(lace_pairs(&lace), graph_lace(0, b as usize, &gu));
                images.entry(lace_pairs(&lace)).or_default().insert(g);
            }
            let enumerated: BTreeSet<Vec<(usize, usize)>> =
                (1..=b as usize).flat_map(|n| enumerate_laces(n, tau, 0, b)).map(|l| lace_pairs(&l)).collect();
            assert_eq!(enumerated, images.keys().cloned().collect::<BTreeSet<_>>());

            for l in (1..=b as usize).flat_map(|n| enumerate_laces(n, tau, 0, b)) {
                assert_eq!(lace_from_graph(&l.graph()).unwrap(), l, "idempotent");
                let comp = compatible_edges(&l, tau);
                let mut built = BTreeSet::new();
                for mask in 0u64..1 << comp.len() {
                    let mut g: Vec<(u32, u32)> = l.edges.iter().map(|e| (e.s, e.t)).collect();
                    g.extend((0..comp.len()).filter(|i| mask >> i & 1 == 1).map(|i| (comp[i].s, comp[i].t)));
                    g.sort();
                    built.insert(g);
                }
                assert_eq!(&built, &images[&lace_pairs(&l)], "lace {l}");
            }
        }
    }
}

#[test]
fn j_factors_match_connected_graph_sums() {
    let cases = [(1, 7), (2, 4)];
    for (dim, n_max) in cases {
        let d = StepDistribution::uniform_box(dim, 1).unwrap();
        for tau in [Memory::Finite(2), Memory::Finite(3), Memory::Infinite] {
            for n in 1..=n_max {
                for (pos, _) in all_walks(&d, n) {
                    let walk = Walk::new(pos.iter().map(|c| site(c)).collect()).unwrap();
                    let by_graphs = j_by_graphs(&pos, tau);
                    let mut alternating = 0i64;
                    for order in 1..=n {
                        let j = j_total(&walk, order, tau) as i64;
                        assert_eq!(j, by_graphs.get(&order).copied().unwrap_or(0), "{pos:?} N={order}");
                        alternating += if order % 2 == 0 { j } else { -j };
                    }
                    assert_eq!(alternating, connected_graph_sum(&pos, tau));
                }
            }
        }
    }
}

#[test]
fn pi_matches_walk_sums() {
    let budget = Budget::default();
    for (dim, n_max) in [(1, 8), (2, 4)] {
        let d = StepDistribution::uniform_box(dim, 1).unwrap();
        for tau in TAUS {
            for n in 2..=n_max {
                let brute = brute_pi(&d, tau, n);
                for order in 1..n {
                    let ours = table_of(&pi_coefficient(&d, tau, order, n, &budget).unwrap().values);
                    let expect = brute.get(&order).cloned().unwrap_or_default();
                    assert_eq!(ours, expect, "d={dim} tau={tau} N={order} n={n}");
                }
            }
        }
    }
}

#[test]
fn edge_helpers() {
    let e = Edge::new(2, 5).unwrap();
    assert_eq!(e.len(), 3);
    assert!(Edge::new(3, 3).is_err());
    let zero: BigRational = rat(0, 1);
    assert_eq!(zero, rat(0, 5));
}
