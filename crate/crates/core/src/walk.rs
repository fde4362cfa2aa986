//! Walks, memory-tau constraints and exact depth-first enumeration of the
//! two-point function `C_{1,n}(x)`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::dist::StepDistribution;
use crate::error::{Error, Result};
use crate::lattice::{format_rational, rational_to_f64, Grid, LatticeField, Site};

/// How far back in time the self-avoidance constraint reaches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Memory {
    Finite(u32),
    Infinite,
}

impl Memory {
    pub fn finite(tau: u32) -> Result<Self> {
        if tau == 0 {
            return Err(Error::InvalidArgument("tau must be >= 1".into()));
        }
        Ok(Memory::Finite(tau))
    }

    /// Whether a pair of times `gap` apart is constrained.
    pub fn covers(&self, gap: u32) -> bool {
        match *self {
            Memory::Finite(t) => gap <= t,
            Memory::Infinite => true,
        }
    }

    pub fn as_finite(&self) -> Option<u32> {
        match *self {
            Memory::Finite(t) => Some(t),
            Memory::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Memory::Infinite)
    }
}

impl fmt::Display for Memory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Memory::Finite(t) => write!(f, "{t}"),
            Memory::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Memory {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "Inf" | "INF" | "saw" => Ok(Memory::Infinite),
            other => {
                let t: u32 = other
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("tau: cannot parse {other:?}")))?;
                Memory::finite(t)
            }
        }
    }
}

impl Serialize for Memory {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Limits checked before an enumeration allocates or starts.
#[derive(Clone, Copy, Debug)]
pub struct Budget {
    pub max_nodes: f64,
    pub max_cells: u128,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_nodes: 2e9,
            max_cells: 1 << 24,
        }
    }
}

impl Budget {
    pub fn check_nodes(&self, estimated: f64) -> Result<()> {
        if estimated > self.max_nodes {
            return Err(Error::BudgetExceeded {
                estimated_nodes: estimated,
                cap: self.max_nodes,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Walk {
    sites: Vec<Site>,
}

impl Walk {
    pub fn new(sites: Vec<Site>) -> Result<Self> {
        let first = sites
            .first()
            .ok_or_else(|| Error::InvalidArgument("a walk needs at least one site".into()))?;
        let dim = first.dim();
        if let Some(bad) = sites.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch(dim, bad.dim()));
        }
        Ok(Walk { sites })
    }

    /// Walk from the origin taking the given steps.
    pub fn from_steps(dim: usize, steps: &[Site]) -> Result<Self> {
        let mut sites = vec![Site::origin(dim)];
        for s in steps {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch(dim, s.dim()));
            }
            let next = sites.last().unwrap().add(s);
            sites.push(next);
        }
        Ok(Walk { sites })
    }

    /// 1-d convenience constructor.
    pub fn line(points: &[i32]) -> Self {
        Walk {
            sites: points.iter().map(|&p| Site(vec![p])).collect(),
        }
    }

    /// Number of steps.
    pub fn len(&self) -> usize {
        self.sites.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.sites[0].dim()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> &Site {
        &self.sites[i]
    }

    pub fn steps(&self) -> Vec<Site> {
        self.sites.windows(2).map(|w| w[1].sub(&w[0])).collect()
    }

    pub fn end(&self) -> &Site {
        self.sites.last().unwrap()
    }
}

/// `prod_i p D(omega(i) - omega(i-1))`; the 0-step walk has weight 1.
pub fn walk_weight(d: &StepDistribution, p: &BigRational, w: &Walk) -> Result<BigRational> {
    if w.dim() != d.dim() {
        return Err(Error::DimensionMismatch(d.dim(), w.dim()));
    }
    let mut weight = BigRational::one();
    for (i, step) in w.steps().iter().enumerate() {
        let m = d.mass(step);
        if m.is_zero() {
            return Err(Error::StepOutsideSupport {
                index: i + 1,
                displacement: step.to_string(),
            });
        }
        weight *= p * m;
    }
    Ok(weight)
}

/// 1 iff no two visits at time distance `<= tau` coincide.
pub fn memory_factor(w: &Walk, tau: Memory) -> u8 {
    let sites = w.sites();
    for t in 1..sites.len() {
        for s in (0..t).rev() {
            if !tau.covers((t - s) as u32) {
                break;
            }
            if sites[s] == sites[t] {
                return 0;
            }
        }
    }
    1
}

/// `C^tau_{1,n}(x)` as an exact table.
#[derive(Clone, Debug)]
pub struct TwoPointTable {
    pub tau: Memory,
    pub n: usize,
    pub values: LatticeField,
}

impl TwoPointTable {
    /// `c_n^tau`, the weighted count.
    pub fn total(&self) -> BigRational {
        self.values.total_exact().expect("exact table")
    }

    /// Number of walks, `c_n M^n`, for uniform step distributions.
    pub fn unweighted_count(&self, d: &StepDistribution) -> Option<BigInt> {
        if !d.is_uniform() {
            return None;
        }
        let scaled = self.total() * BigRational::from_integer(BigInt::from(d.support_size()).pow(self.n as u32));
        scaled.is_integer().then(|| scaled.to_integer())
    }

    pub fn get(&self, x: &Site) -> BigRational {
        self.values.get_exact(x).expect("exact table")
    }

    /// Rows `x_1,..,x_d,numerator,denominator` sorted by site.
    pub fn to_csv(&self) -> String {
        let dim = self.values.dim();
        let mut out = String::new();
        let header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",numerator,denominator\n");
        for (s, v) in self.values.exact_entries().expect("exact table") {
            let coords: Vec<String> = s.coords().iter().map(|c| c.to_string()).collect();
            out.push_str(&format!("{},{},{}\n", coords.join(","), v.numer(), v.denom()));
        }
        out
    }
}

/// Rough node count of the pruned search tree.
pub fn estimate_walk_nodes(support: usize, tau: Memory, n: usize) -> f64 {
    let m = support as f64;
    let branch = if tau == Memory::Finite(1) { m } else { (m - 1.0).max(1.0) };
    let mut total = 1.0;
    let mut level = 1.0;
    for j in 1..=n {
        level *= if j == 1 { m } else { branch };
        total += level;
    }
    total
}

struct Enumerator<'a> {
    tau: Memory,
    n_max: usize,
    cells: usize,
    offsets: Vec<isize>,
    nums: &'a [u64],
}

impl Enumerator<'_> {
    fn run(&self, depth: usize, pos: usize, weight: u128, last: &mut [i32], acc: &mut [u128]) {
        acc[depth * self.cells + pos] += weight;
        if depth == self.n_max {
            return;
        }
        let next_time = depth as i32 + 1;
        for (off, &num) in self.offsets.iter().zip(self.nums) {
            let q = (pos as isize + off) as usize;
            let prev = last[q];
            let blocked = match self.tau {
                Memory::Infinite => prev >= 0,
                Memory::Finite(t) => prev >= 0 && next_time - prev <= t as i32,
            };
            if blocked {
                continue;
            }
            last[q] = next_time;
            self.run(depth + 1, q, weight * num as u128, last, acc);
            last[q] = prev;
        }
    }
}

/// Tables `C_{1,0}, ..., C_{1,n_max}` from a single search.
pub fn two_point_tables(d: &StepDistribution, tau: Memory, n_max: usize, budget: &Budget) -> Result<Vec<TwoPointTable>> {
    budget.check_nodes(estimate_walk_nodes(d.support_size(), tau, n_max))?;
    let radius = (n_max as i32).max(1) * d.range();
    let cells = Grid::cells(d.dim(), radius);
    if cells * (n_max as u128 + 1) > budget.max_cells {
        return Err(Error::MemoryBudget {
            n: n_max,
            cells,
            cap: budget.max_cells,
        });
    }
    let denom = BigInt::from(d.denominator());
    let top = denom.pow(n_max as u32);
    if top.to_u128().is_none() {
        return Err(Error::Overflow);
    }
    let grid = Grid::new(d.dim(), radius);
    let cells = grid.len();
    let en = Enumerator {
        tau,
        n_max,
        cells,
        offsets: d.steps().iter().map(|s| grid.offset(s)).collect(),
        nums: d.numerators(),
    };
    let origin = grid.origin();
    let width = cells * (n_max + 1);
    let acc = if n_max == 0 {
        let mut acc = vec![0u128; width];
        acc[origin] = 1;
        acc
    } else {
        let mut acc = (0..d.support_size())
            .into_par_iter()
            .fold(
                || vec![0u128; width],
                |mut acc, i| {
                    let mut last = vec![i32::MIN; cells];
                    last[origin] = 0;
                    let q = (origin as isize + en.offsets[i]) as usize;
                    if tau.covers(1) {
                        last[q] = 1;
                    }
                    en.run(1, q, en.nums[i] as u128, &mut last, &mut acc);
                    acc
                },
            )
            .reduce(
                || vec![0u128; width],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            );
        acc[origin] = 1;
        acc
    };
    let mut tables = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let den = denom.pow(n as u32);
        let entries = acc[n * cells..(n + 1) * cells]
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(idx, &v)| (grid.site(idx), BigRational::new(BigInt::from(v), den.clone())))
            .collect();
        tables.push(TwoPointTable {
            tau,
            n,
            values: LatticeField::from_exact(d.dim(), entries)?,
        });
    }
    Ok(tables)
}

/// `C^tau_{1,n}` restricted to `x_filter` when given.
pub fn two_point_n(
    d: &StepDistribution,
    tau: Memory,
    n: usize,
    x_filter: Option<&BTreeSet<Site>>,
    budget: &Budget,
) -> Result<TwoPointTable> {
    let mut table = two_point_tables(d, tau, n, budget)?.pop().expect("n+1 tables");
    if let Some(keep) = x_filter {
        let entries = table
            .values
            .exact_entries()
            .expect("exact")
            .iter()
            .filter(|(s, _)| keep.contains(*s))
            .map(|(s, v)| (s.clone(), v.clone()))
            .collect();
        table.values = LatticeField::from_exact(d.dim(), entries)?;
    }
    Ok(table)
}

/// `sum_{n=0}^{n_max} p^n c_n^tau`.
pub fn susceptibility_truncated(d: &StepDistribution, tau: Memory, p: &BigRational, n_max: usize, budget: &Budget) -> Result<BigRational> {
    let tables = two_point_tables(d, tau, n_max, budget)?;
    let mut total = BigRational::zero();
    let mut pn = BigRational::one();
    for t in &tables {
        total += &pn * t.total();
        pn *= p;
    }
    Ok(total)
}

/// `(n, (c_n^tau)^{1/n})` for `n = 1..=n_max`; each value bounds `mu_tau`
/// from above.
pub fn mu_bounds(d: &StepDistribution, tau: Memory, n_max: usize, budget: &Budget) -> Result<Vec<(usize, f64)>> {
    let tables = two_point_tables(d, tau, n_max, budget)?;
    Ok(tables
        .iter()
        .skip(1)
        .map(|t| (t.n, rational_to_f64(&t.total()).powf(1.0 / t.n as f64)))
        .collect())
}

/// `c_n^tau` as `"num/den"` strings, handy for reports.
pub fn counts_as_strings(tables: &[TwoPointTable]) -> Vec<String> {
    tables.iter().map(|t| format_rational(&t.total())).collect()
}
