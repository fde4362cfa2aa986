//! Expansion coefficients `pi^(N)_{1,n}(x)` by per-lace enumeration.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::StepDistribution;
use crate::error::{Error, Result};
use crate::lace::{compatible_edges, enumerate_laces, Lace};
use crate::lattice::{format_rational, rational_to_f64, LatticeField, Mode, Site};
use crate::walk::{Budget, Memory};

/// Unsigned `pi^(N)_{1,n}(x)` at `p = 1`.
#[derive(Clone, Debug)]
pub struct PiTable {
    pub tau: Memory,
    pub order: usize,
    pub n: usize,
    pub values: LatticeField,
}

impl PiTable {
    /// `pi-hat(0)`.
    pub fn hat_zero(&self) -> BigRational {
        self.values.total_exact().expect("exact table")
    }

    pub fn hat(&self, k: &[f64]) -> f64 {
        self.values.fourier_re(k)
    }

    /// `sum_x |x|^2 pi(x)`.
    pub fn second_moment(&self) -> BigRational {
        self.values.second_moment_exact().expect("exact table")
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }
}

// Dense lookup from a displacement in [-L, L]^d to a step index.
struct StepLookup {
    range: i32,
    side: i64,
    index: Vec<i32>,
}

impl StepLookup {
    fn new(d: &StepDistribution) -> Self {
        let range = d.range();
        let side = 2 * range as i64 + 1;
        let mut index = vec![-1; side.pow(d.dim() as u32) as usize];
        for (i, s) in d.steps().iter().enumerate() {
            index[Self::key(range, side, s.coords())] = i as i32;
        }
        StepLookup { range, side, index }
    }

    fn key(range: i32, side: i64, v: &[i32]) -> usize {
        v.iter().fold(0i64, |acc, &c| acc * side + (c + range) as i64) as usize
    }

    fn find(&self, v: &[i32]) -> Option<usize> {
        if v.iter().any(|c| c.abs() > self.range) {
            return None;
        }
        let i = self.index[Self::key(self.range, self.side, v)];
        (i >= 0).then_some(i as usize)
    }
}

struct LaceSearch<'a> {
    dim: usize,
    range: i32,
    n: usize,
    steps: Vec<i32>,
    nums: &'a [u64],
    lookup: &'a StepLookup,
    close_at: Vec<Vec<usize>>,
    avoid_at: Vec<Vec<usize>>,
    // lace edges (s, t) with s < time < t, for the reachability bound
    open_at: Vec<Vec<(usize, usize)>>,
}

impl LaceSearch<'_> {
    fn new<'a>(d: &'a StepDistribution, lookup: &'a StepLookup, lace: &Lace, tau: Memory) -> LaceSearch<'a> {
        let n = (lace.b - lace.a) as usize;
        let mut close_at = vec![Vec::new(); n + 1];
        let mut open_at = vec![Vec::new(); n + 1];
        for e in &lace.edges {
            close_at[e.t as usize].push(e.s as usize);
            for time in e.s as usize + 1..e.t as usize {
                open_at[time].push((e.s as usize, e.t as usize));
            }
        }
        let mut avoid_at = vec![Vec::new(); n + 1];
        for e in compatible_edges(lace, tau) {
            // length-1 coincidences are impossible since D(o) = 0
            if e.len() > 1 {
                avoid_at[e.t as usize].push(e.s as usize);
            }
        }
        LaceSearch {
            dim: d.dim(),
            range: d.range(),
            n,
            steps: d.steps().iter().flat_map(|s| s.coords().to_vec()).collect(),
            nums: d.numerators(),
            lookup,
            close_at,
            avoid_at,
            open_at,
        }
    }

    fn run(&self) -> BTreeMap<Vec<i32>, u128> {
        let mut pos = vec![0i32; (self.n + 1) * self.dim];
        let mut acc = BTreeMap::new();
        self.dfs(0, 1, &mut pos, &mut acc);
        acc
    }

    fn at<'p>(&self, pos: &'p [i32], time: usize) -> &'p [i32] {
        &pos[time * self.dim..(time + 1) * self.dim]
    }

    fn admissible(&self, pos: &[i32], time: usize) -> bool {
        let z = self.at(pos, time);
        for &s in &self.close_at[time] {
            if self.at(pos, s) != z {
                return false;
            }
        }
        for &s in &self.avoid_at[time] {
            if self.at(pos, s) == z {
                return false;
            }
        }
        for &(s, t) in &self.open_at[time] {
            let reach = (t - time) as i32 * self.range;
            let far = self
                .at(pos, s)
                .iter()
                .zip(z)
                .any(|(a, b)| (a - b).abs() > reach);
            if far {
                return false;
            }
        }
        true
    }

    fn dfs(&self, time: usize, weight: u128, pos: &mut [i32], acc: &mut BTreeMap<Vec<i32>, u128>) {
        if time == self.n {
            let end = self.at(pos, time).to_vec();
            *acc.entry(end).or_insert(0) += weight;
            return;
        }
        let next = time + 1;
        let dim = self.dim;
        if let Some(&s) = self.close_at[next].first() {
            let step: Vec<i32> = (0..dim).map(|c| pos[s * dim + c] - pos[time * dim + c]).collect();
            let Some(i) = self.lookup.find(&step) else {
                return;
            };
            for c in 0..dim {
                pos[next * dim + c] = pos[s * dim + c];
            }
            if self.admissible(pos, next) {
                self.dfs(next, weight * self.nums[i] as u128, pos, acc);
            }
            return;
        }
        for (i, &num) in self.nums.iter().enumerate() {
            for c in 0..dim {
                pos[next * dim + c] = pos[time * dim + c] + self.steps[i * dim + c];
            }
            if self.admissible(pos, next) {
                self.dfs(next, weight * num as u128, pos, acc);
            }
        }
    }
}

fn lace_cost(lace: &Lace, support: usize) -> f64 {
    let mut closing: Vec<u32> = lace.edges.iter().map(|e| e.t).collect();
    closing.dedup();
    let free = (lace.b - lace.a) as usize - closing.len();
    (support as f64).powi(free as i32)
}

/// Rough node count for `pi^(N)_{1,n}`.
pub fn estimate_pi_nodes(d: &StepDistribution, tau: Memory, order: usize, n: usize) -> f64 {
    enumerate_laces(order, tau, 0, n as u32)
        .iter()
        .map(|l| lace_cost(l, d.support_size()))
        .sum()
}

/// `pi^{tau,(N)}_{1,n}` as an exact table.
pub fn pi_coefficient(d: &StepDistribution, tau: Memory, order: usize, n: usize, budget: &Budget) -> Result<PiTable> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("pi needs n >= 2, got {n}")));
    }
    if order == 0 {
        return Err(Error::InvalidArgument("loop order N must be >= 1".into()));
    }
    let empty = PiTable {
        tau,
        order,
        n,
        values: LatticeField::zero(d.dim(), Mode::Exact),
    };
    if let Some(t) = tau.as_finite() {
        if n > order * t as usize {
            return Ok(empty);
        }
    }
    let laces = enumerate_laces(order, tau, 0, n as u32);
    if laces.is_empty() {
        return Ok(empty);
    }
    let estimate: f64 = laces.iter().map(|l| lace_cost(l, d.support_size())).sum();
    budget.check_nodes(estimate)?;
    let denom = BigInt::from(d.denominator()).pow(n as u32);
    if denom.to_u128().is_none() {
        return Err(Error::Overflow);
    }
    let lookup = StepLookup::new(d);
    let merged = laces
        .par_iter()
        .map(|l| Ok::<_, Error>(LaceSearch::new(d, &lookup, l, tau).run()))
        .try_reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                let slot = a.entry(k).or_insert(0u128);
                *slot = slot.checked_add(v).ok_or(Error::Overflow)?;
            }
            Ok(a)
        })?;
    let entries = merged
        .into_iter()
        .map(|(k, v)| (Site(k), BigRational::new(BigInt::from(v), denom.clone())))
        .collect();
    Ok(PiTable {
        tau,
        order,
        n,
        values: LatticeField::from_exact(d.dim(), entries)?,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PiRow {
    pub order: usize,
    pub tau: Memory,
    pub n: usize,
    pub x: Vec<i32>,
    pub numerator: String,
    pub denominator: String,
}

/// All tables `pi^(N)_{1,n}` for `2 <= n <= n_max` and `N <= order_max`.
#[derive(Clone, Debug)]
pub struct PiSeries {
    pub tau: Memory,
    pub n_max: usize,
    pub order_max: usize,
    tables: BTreeMap<(usize, usize), PiTable>,
}

impl PiSeries {
    /// `order_max = None` keeps every order that can contribute (`N < n`).
    pub fn compute(d: &StepDistribution, tau: Memory, n_max: usize, order_max: Option<usize>, budget: &Budget) -> Result<Self> {
        let order_max = order_max.unwrap_or(n_max.saturating_sub(1)).max(1);
        let mut tables = BTreeMap::new();
        let mut estimate = 0.0;
        for n in 2..=n_max {
            for order in 1..=order_max.min(n - 1) {
                estimate += estimate_pi_nodes(d, tau, order, n);
            }
        }
        budget.check_nodes(estimate)?;
        for n in 2..=n_max {
            for order in 1..=order_max.min(n - 1) {
                tables.insert((order, n), pi_coefficient(d, tau, order, n, budget)?);
            }
        }
        Ok(PiSeries {
            tau,
            n_max,
            order_max,
            tables,
        })
    }

    pub fn table(&self, order: usize, n: usize) -> Option<&PiTable> {
        self.tables.get(&(order, n))
    }

    pub fn tables(&self) -> impl Iterator<Item = &PiTable> {
        self.tables.values()
    }

    fn sign(order: usize) -> i32 {
        if order % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// `pi_{1,n}(x) = sum_N (-1)^N pi^(N)_{1,n}(x)` over orders `<= order_max`.
    pub fn signed(&self, n: usize, order_max: usize) -> Result<LatticeField> {
        let dim = self
            .tables
            .values()
            .next()
            .map(|t| t.values.dim())
            .ok_or_else(|| Error::MissingPi(n))?;
        if n > self.n_max {
            return Err(Error::MissingPi(n));
        }
        let mut acc = LatticeField::zero(dim, Mode::Exact);
        for ((order, m), t) in &self.tables {
            if *m == n && *order <= order_max {
                acc = acc.add_scaled_exact(&t.values, &BigRational::from_integer(Self::sign(*order).into()))?;
            }
        }
        Ok(acc)
    }

    /// `pi-hat_{p,m}(k)` for `m = 0..=n_max` (zero for `m < 2`).
    pub fn hat_p(&self, p: f64, k: &[f64], order_max: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_max + 1];
        for ((order, m), t) in &self.tables {
            if *order <= order_max && !t.is_zero() {
                out[*m] += Self::sign(*order) as f64 * p.powi(*m as i32) * t.hat(k);
            }
        }
        out
    }

    /// `Pi-hat_p(0)` over the truncation.
    pub fn big_pi_hat_zero(&self, p: f64, order_max: usize) -> f64 {
        self.tables
            .iter()
            .filter(|((o, _), _)| *o <= order_max)
            .map(|((o, m), t)| Self::sign(*o) as f64 * p.powi(*m as i32) * rational_to_f64(&t.hat_zero()))
            .sum()
    }

    /// `d/dp Pi-hat_p(0)`, using `d/dp p^n = n p^{n-1}` termwise.
    pub fn big_pi_hat_zero_derivative(&self, p: f64, order_max: usize) -> f64 {
        self.tables
            .iter()
            .filter(|((o, _), _)| *o <= order_max)
            .map(|((o, m), t)| Self::sign(*o) as f64 * *m as f64 * p.powi(*m as i32 - 1) * rational_to_f64(&t.hat_zero()))
            .sum()
    }

    /// `sum_x |x|^2 Pi_p(x)` over the truncation.
    pub fn big_pi_second_moment(&self, p: f64, order_max: usize) -> f64 {
        self.tables
            .iter()
            .filter(|((o, _), _)| *o <= order_max)
            .map(|((o, m), t)| Self::sign(*o) as f64 * p.powi(*m as i32) * rational_to_f64(&t.second_moment()))
            .sum()
    }

    pub fn rows(&self) -> Vec<PiRow> {
        let mut rows = Vec::new();
        for ((order, n), t) in &self.tables {
            for (x, v) in t.values.exact_entries().expect("exact") {
                rows.push(PiRow {
                    order: *order,
                    tau: self.tau,
                    n: *n,
                    x: x.coords().to_vec(),
                    numerator: v.numer().to_string(),
                    denominator: v.denom().to_string(),
                });
            }
        }
        rows
    }

    /// `N,tau,n,x,numerator,denominator` with `x` written as `(a,b,..)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,tau,n,x,numerator,denominator\n");
        for r in self.rows() {
            let x: Vec<String> = r.x.iter().map(|c| c.to_string()).collect();
            out.push_str(&format!(
                "{},{},{},\"({})\",{},{}\n",
                r.order,
                r.tau,
                r.n,
                x.join(","),
                r.numerator,
                r.denominator
            ));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.rows()).expect("rows serialize")
    }

    /// `pi-hat^(N)_{1,n}(0)` as `"num/den"`.
    pub fn hat_zero_strings(&self) -> Vec<(usize, usize, String)> {
        self.tables
            .iter()
            .map(|((o, n), t)| (*o, *n, format_rational(&t.hat_zero())))
            .collect()
    }
}

/// Whether all tables in two series agree exactly for `n <= n_cap`.
pub fn series_agree(a: &PiSeries, b: &PiSeries, n_cap: usize) -> bool {
    a.tables
        .iter()
        .filter(|((_, n), _)| *n <= n_cap)
        .all(|(key, t)| match b.tables.get(key) {
            Some(u) => t.values == u.values,
            None => t.values.total_exact().map_or(false, |v| v.is_zero()),
        })
}
