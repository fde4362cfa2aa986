mod common;

use std::collections::BTreeMap;

use common::*;
use lacewalk::dist::BoxConvolution;
use lacewalk::lace::{enumerate_laces, lace_from_graph};
use lacewalk::walk::walk_weight;
use lacewalk::{IntervalGraph, LatticeField, Memory, Site, StepDistribution, Walk};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use proptest::prelude::*;

fn exact_field(dim: usize) -> impl Strategy<Value = LatticeField> {
    prop::collection::vec((prop::collection::vec(-2i32..=2, dim), -9i64..=9, 1i64..=7), 1..6).prop_map(move |cells| {
        let mut m: BTreeMap<Site, BigRational> = BTreeMap::new();
        for (c, n, d) in cells {
            *m.entry(Site(c)).or_insert_with(|| rat(0, 1)) += rat(n, d);
        }
        LatticeField::from_exact(dim, m).unwrap()
    })
}

fn fields3() -> impl Strategy<Value = (LatticeField, LatticeField, LatticeField)> {
    (1usize..=2).prop_flat_map(|dim| (exact_field(dim), exact_field(dim), exact_field(dim)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convolution_commutes_and_associates((f, g, h) in fields3()) {
        prop_assert_eq!(f.convolve(&g).unwrap(), g.convolve(&f).unwrap());
        let left = f.convolve(&g).unwrap().convolve(&h).unwrap();
        let right = f.convolve(&g.convolve(&h).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn float_mode_tracks_exact((f, g, _) in fields3()) {
        let exact = f.convolve(&g).unwrap();
        let float = f.to_float().convolve(&g.to_float()).unwrap();
        for (s, v) in exact.exact_entries().unwrap() {
            prop_assert!((v.to_f64().unwrap() - float.get_f64(s)).abs() < 1e-12);
        }
        for (s, v) in float.iter_f64() {
            let e = exact.get_exact(s).map(|r| r.to_f64().unwrap()).unwrap_or(0.0);
            prop_assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn d_hat_symmetries(dim in 1usize..=3, l in 1i32..=2, k in prop::collection::vec(-3.2f64..3.2, 3), flip in 0usize..3) {
        let d = StepDistribution::uniform_box(dim, l).unwrap();
        let k = &k[..dim];
        let v = d.d_hat(k);
        let neg: Vec<f64> = k.iter().map(|x| -x).collect();
        prop_assert!((v - d.d_hat(&neg)).abs() < 1e-14);
        let mut one = k.to_vec();
        one[flip % dim] = -one[flip % dim];
        prop_assert!((v - d.d_hat(&one)).abs() < 1e-14);
        prop_assert!(d.d_hat_complex(k).1.abs() < 1e-14);
    }

    #[test]
    fn powers_transform_to_powers(dim in 1usize..=2, l in 1i32..=2, n in 1usize..=10, k in prop::collection::vec(-3.2f64..3.2, 2)) {
        let d = StepDistribution::uniform_box(dim, l).unwrap();
        let k = &k[..dim];
        let mut f = d.field().to_float();
        for _ in 1..n {
            f = f.convolve(&d.field().to_float()).unwrap();
        }
        prop_assert!((f.fourier_re(k) - d.d_hat(k).powi(n as i32)).abs() < 1e-10);
    }

    #[test]
    fn weights_factor_out_p(steps in prop::collection::vec(prop::sample::select(vec![-2i32, -1, 1, 2]), 0..8), pn in 1i64..9, pd in 1i64..9) {
        let d = StepDistribution::uniform_box(1, 2).unwrap();
        let mut pts = vec![0];
        for s in &steps {
            pts.push(pts.last().unwrap() + s);
        }
        let w = Walk::line(&pts);
        let p = rat(pn, pd);
        let lhs = walk_weight(&d, &p, &w).unwrap();
        let rhs = walk_weight(&d, &BigRational::one(), &w).unwrap() * p.pow(steps.len() as i32);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn lace_construction_total_and_idempotent(mask in any::<u32>(), b in 2u32..=6) {
        let mut all = Vec::new();
        for s in 0..b {
            for t in s + 1..=b {
                all.push((s, t));
            }
        }
        let g: Vec<(u32, u32)> = all.iter().enumerate().filter(|(i, _)| mask >> (*i as u32 % 32) & 1 == 1).map(|(_, e)| *e).collect();
        let gu: Vec<(usize, usize)> = g.iter().map(|&(s, t)| (s as usize, t as usize)).collect();
        let ig = IntervalGraph::from_pairs(0, b, &g).unwrap();
        prop_assert_eq!(ig.is_connected(), is_connected(0, b as usize, &gu));
        if let Ok(l) = lace_from_graph(&ig) {
            prop_assert_eq!(lace_from_graph(&l.graph()).unwrap(), l.clone());
            prop_assert!(enumerate_laces(l.order(), Memory::Infinite, 0, b).contains(&l));
        } else {
            prop_assert!(!is_connected(0, b as usize, &gu));
        }
    }
}

#[test]
fn box_heat_kernel_matches_direct_convolution() {
    let d = StepDistribution::uniform_box(2, 1).unwrap();
    let bc = BoxConvolution::new(2, 1, 6);
    let mut f = d.field().clone();
    for n in 1..=6 {
        for (s, v) in f.exact_entries().unwrap() {
            assert_eq!(&bc.value(n, s.coords()), v, "n={n} x={s}");
        }
        f = f.convolve(d.field()).unwrap();
    }
}

#[test]
fn variance_approaches_continuum() {
    for dim in [1usize, 2, 3] {
        let gaps: Vec<f64> = [1, 2, 4, 8, 16]
            .iter()
            .map(|&l| {
                let d = StepDistribution::uniform_box(dim, l).unwrap();
                (d.sigma2_f64() / (l * l) as f64 - dim as f64 / 3.0).abs()
            })
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "d={dim}: {gaps:?}");
    }
}
