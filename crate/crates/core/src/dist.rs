//! Step distributions on Z^d, their Fourier transforms and moments, the
//! grid check of the spread-out regularity conditions, heat-kernel profiles
//! and the continuum box kernel.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{box_sites, rational_to_f64, LatticeField, Mode, Site};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum KernelKind {
    /// `D(x) = 1{0 < |x|_inf <= L} / ((2L+1)^d - 1)`.
    UniformBox,
    Custom,
}

/// A lattice-symmetric probability mass on Z^d with no mass at the origin.
#[derive(Clone, Debug)]
pub struct StepDistribution {
    dim: usize,
    range: i32,
    kind: KernelKind,
    field: LatticeField,
    steps: Vec<Site>,
    masses: Vec<BigRational>,
    masses_f64: Vec<f64>,
    // masses[i] = numerators[i] / denominator
    numerators: Vec<u64>,
    denominator: u64,
    sigma2: BigRational,
    beta: BigRational,
}

impl StepDistribution {
    /// Uniform mass on the punctured box `0 < |x|_inf <= L`.
    pub fn uniform_box(dim: usize, range: i32) -> Result<Self> {
        if dim == 0 || range <= 0 {
            return Err(Error::InvalidArgument(format!(
                "uniform box needs d >= 1 and L >= 1, got d = {dim}, L = {range}"
            )));
        }
        let sites: Vec<Site> = box_sites(dim, range)
            .into_iter()
            .filter(|s| !s.is_origin())
            .collect();
        let m = sites.len() as i64;
        let mass = BigRational::new(BigInt::one(), BigInt::from(m));
        let masses = sites.into_iter().map(|s| (s, mass.clone())).collect();
        let mut d = Self::build(dim, range, masses)?;
        d.kind = KernelKind::UniformBox;
        Ok(d)
    }

    /// Validates an arbitrary mass function against the invariants.
    pub fn from_masses(dim: usize, range: i32, masses: BTreeMap<Site, BigRational>) -> Result<Self> {
        if dim == 0 || range <= 0 {
            return Err(Error::InvalidArgument("need d >= 1 and L >= 1".into()));
        }
        let total = masses.values().fold(BigRational::zero(), |a, v| a + v);
        if !total.is_one() {
            return Err(Error::InvalidArgument(format!("masses sum to {total}, not 1")));
        }
        for (s, v) in &masses {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch(dim, s.dim()));
            }
            if v.is_negative() {
                return Err(Error::InvalidArgument(format!("negative mass at {s}")));
            }
            if v.is_zero() {
                continue;
            }
            if s.is_origin() {
                return Err(Error::InvalidArgument("mass at the origin must be 0".into()));
            }
            if s.norm_inf() > range {
                return Err(Error::InvalidArgument(format!("{s} lies outside range {range}")));
            }
            let zero = BigRational::zero();
            for axis in 0..dim {
                let mut flipped = s.clone();
                flipped.0[axis] = -flipped.0[axis];
                if masses.get(&flipped).unwrap_or(&zero) != v {
                    return Err(Error::InvalidArgument(format!("not symmetric under sign flip of axis {axis} at {s}")));
                }
                if axis + 1 < dim {
                    let mut swapped = s.clone();
                    swapped.0.swap(axis, axis + 1);
                    if masses.get(&swapped).unwrap_or(&zero) != v {
                        return Err(Error::InvalidArgument(format!("not symmetric under axis swap at {s}")));
                    }
                }
            }
        }
        Self::build(dim, range, masses)
    }

    fn build(dim: usize, range: i32, masses: BTreeMap<Site, BigRational>) -> Result<Self> {
        let field = LatticeField::from_exact(dim, masses)?;
        let entries = field.exact_entries().expect("exact");
        let steps: Vec<Site> = entries.keys().cloned().collect();
        let mass: Vec<BigRational> = entries.values().cloned().collect();
        let denom = mass
            .iter()
            .fold(BigInt::one(), |acc, m| acc.lcm(m.denom()));
        let denominator = denom
            .to_u64()
            .ok_or_else(|| Error::InvalidArgument("mass denominators too large".into()))?;
        let numerators = mass
            .iter()
            .map(|m| (m.numer() * (&denom / m.denom())).to_u64().ok_or(Error::Overflow))
            .collect::<Result<Vec<u64>>>()?;
        let sigma2 = field.second_moment_exact().expect("exact");
        let beta = BigRational::new(BigInt::one(), BigInt::from(range).pow(dim as u32));
        Ok(StepDistribution {
            dim,
            range,
            kind: KernelKind::Custom,
            masses_f64: mass.iter().map(rational_to_f64).collect(),
            field,
            steps,
            masses: mass,
            numerators,
            denominator,
            sigma2,
            beta,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn range(&self) -> i32 {
        self.range
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    /// Number of support points (M for the uniform box).
    pub fn support_size(&self) -> usize {
        self.steps.len()
    }

    pub fn steps(&self) -> &[Site] {
        &self.steps
    }

    pub fn masses(&self) -> &[BigRational] {
        &self.masses
    }

    pub fn masses_f64(&self) -> &[f64] {
        &self.masses_f64
    }

    /// Integer numerators over [`Self::denominator`].
    pub fn numerators(&self) -> &[u64] {
        &self.numerators
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn field(&self) -> &LatticeField {
        &self.field
    }

    pub fn mass(&self, x: &Site) -> BigRational {
        self.field.get_exact(x).expect("exact")
    }

    pub fn step_index(&self, x: &Site) -> Option<usize> {
        self.steps.binary_search(x).ok()
    }

    pub fn is_uniform(&self) -> bool {
        self.numerators.iter().all(|&n| n == self.numerators[0])
    }

    /// `sum_x |x|^2 D(x)`.
    pub fn sigma2(&self) -> &BigRational {
        &self.sigma2
    }

    pub fn sigma2_f64(&self) -> f64 {
        rational_to_f64(&self.sigma2)
    }

    /// `L^{-d}`.
    pub fn beta(&self) -> &BigRational {
        &self.beta
    }

    pub fn beta_f64(&self) -> f64 {
        rational_to_f64(&self.beta)
    }

    /// `sum_x |x|^q D(x)` for real q.
    pub fn moment(&self, q: f64) -> f64 {
        self.steps
            .iter()
            .zip(&self.masses_f64)
            .map(|(s, m)| (s.norm2() as f64).powf(q / 2.0) * m)
            .sum()
    }

    pub fn sup_mass(&self) -> f64 {
        self.masses_f64.iter().cloned().fold(0.0, f64::max)
    }

    /// `D-hat(k) = sum_x D(x) cos(k.x)`, summed over the common denominator
    /// so that `D-hat(0) = 1` holds exactly.
    pub fn d_hat(&self, k: &[f64]) -> f64 {
        let total: f64 = self
            .steps
            .iter()
            .zip(&self.numerators)
            .map(|(s, &m)| m as f64 * s.dot(k).cos())
            .sum();
        total / self.denominator as f64
    }

    /// Complex transform; the imaginary part vanishes by symmetry.
    pub fn d_hat_complex(&self, k: &[f64]) -> (f64, f64) {
        self.field.fourier(k)
    }
}

/// Empirical constants from a grid check of the regularity conditions.
#[derive(Clone, Debug, Serialize)]
pub struct AssumptionDReport {
    pub dim: usize,
    pub range: i32,
    pub grid_resolution: usize,
    pub epsilon: f64,
    pub sigma2_over_l2: f64,
    pub sup_mass_over_beta: f64,
    /// min of `(1 - D-hat) / (L^2 |k|^2)` over sampled `0 < |k|_inf <= 1/L`
    pub c1: f64,
    /// max of the same ratio
    pub c2: f64,
    /// min of `1 - D-hat` over sampled `|k|_inf >= 1/L`
    pub eta_low: f64,
    pub max_one_minus_dhat: f64,
    /// `2 - max(1 - D-hat)`
    pub eta_high: f64,
    pub moment_2_plus_2eps: f64,
    pub one_minus_dhat_at_zero: f64,
    pub max_abs_imag: f64,
    pub warnings: Vec<String>,
}

impl AssumptionDReport {
    pub fn has_violation(&self) -> bool {
        !self.warnings.is_empty()
    }
}

/// Samples `k` on the uniform grid `-pi + 2 pi j / R`, `j = 0..=R`, of
/// `[-pi, pi]^d` and reports the empirical constants. A numeric check only.
pub fn verify_assumption_d(d: &StepDistribution, grid_resolution: usize, epsilon: f64) -> Result<AssumptionDReport> {
    if grid_resolution < 8 {
        return Err(Error::InvalidArgument("grid_resolution must be >= 8".into()));
    }
    let dim = d.dim();
    let l = d.range() as f64;
    let pts = grid_resolution + 1;
    let axis: Vec<f64> = (0..pts)
        .map(|j| -PI + 2.0 * PI * j as f64 / grid_resolution as f64)
        .collect();
    let total = pts.pow(dim as u32);
    let mut c1 = f64::INFINITY;
    let mut c2: f64 = 0.0;
    let mut eta_low = f64::INFINITY;
    let mut max_omd: f64 = 0.0;
    let mut max_imag: f64 = 0.0;
    let mut idx = vec![0usize; dim];
    let mut k = vec![0.0; dim];
    for _ in 0..total {
        for c in 0..dim {
            k[c] = axis[idx[c]];
        }
        let (re, im) = d.d_hat_complex(&k);
        max_imag = max_imag.max(im.abs());
        let omd = 1.0 - re;
        max_omd = max_omd.max(omd);
        let kinf = k.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let k2: f64 = k.iter().map(|x| x * x).sum();
        if kinf <= 1.0 / l + 1e-15 {
            if k2 > 0.0 {
                let ratio = omd / (l * l * k2);
                c1 = c1.min(ratio);
                c2 = c2.max(ratio);
            }
        }
        if kinf >= 1.0 / l - 1e-15 {
            eta_low = eta_low.min(omd);
        }
        for c in (0..dim).rev() {
            idx[c] += 1;
            if idx[c] < pts {
                break;
            }
            idx[c] = 0;
        }
    }
    let one_minus_dhat_at_zero = 1.0 - d.d_hat(&vec![0.0; dim]);
    let eta_high = 2.0 - max_omd;
    let mut warnings = Vec::new();
    if !(c1 > 0.0) {
        warnings.push(format!("lower small-k bound fails: min (1 - D-hat)/(L^2 |k|^2) = {c1}"));
    }
    if !(eta_low > 0.0) {
        warnings.push(format!("1 - D-hat > eta fails on |k|_inf >= 1/L: min = {eta_low}"));
    }
    if !(eta_high > 0.0) {
        warnings.push(format!(
            "1 - D-hat < 2 - eta requires eta <= {eta_high} (max of 1 - D-hat is {max_omd})"
        ));
    }
    Ok(AssumptionDReport {
        dim,
        range: d.range(),
        grid_resolution,
        epsilon,
        sigma2_over_l2: d.sigma2_f64() / (l * l),
        sup_mass_over_beta: d.sup_mass() / d.beta_f64(),
        c1,
        c2,
        eta_low,
        max_one_minus_dhat: max_omd,
        eta_high,
        moment_2_plus_2eps: d.moment(2.0 + 2.0 * epsilon),
        one_minus_dhat_at_zero,
        max_abs_imag: max_imag,
        warnings,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeatKernelMethod {
    /// Separable evaluation for the uniform box, FFT otherwise.
    Auto,
    /// Exact integer evaluation through the product structure of the box.
    Separable,
    /// Iterated FFT convolution on an enclosing box.
    Fft,
}

#[derive(Clone, Debug, Serialize)]
pub struct HeatKernelRow {
    pub n: usize,
    pub sup: f64,
    /// `n^{d/2} sup_x D^{*n}(x) / beta`
    pub normalized: f64,
}

/// `sup_x D^{*n}(x)` for `n = 1..=n_max`.
pub fn heat_kernel_profile(d: &StepDistribution, n_max: usize, method: HeatKernelMethod) -> Result<Vec<HeatKernelRow>> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be >= 1".into()));
    }
    let method = match method {
        HeatKernelMethod::Auto if d.kind() == KernelKind::UniformBox => HeatKernelMethod::Separable,
        HeatKernelMethod::Auto => HeatKernelMethod::Fft,
        m => m,
    };
    let sups = match method {
        HeatKernelMethod::Separable => {
            if d.kind() != KernelKind::UniformBox {
                return Err(Error::InvalidArgument("separable heat kernel needs the uniform box".into()));
            }
            let eval = BoxConvolution::new(d.dim(), d.range(), n_max);
            (1..=n_max).map(|n| eval.sup(n)).collect::<Vec<_>>()
        }
        _ => fft_sups(d, n_max)?,
    };
    let beta = d.beta_f64();
    let half_d = d.dim() as f64 / 2.0;
    Ok(sups
        .into_iter()
        .enumerate()
        .map(|(i, sup)| {
            let n = i + 1;
            HeatKernelRow {
                n,
                sup,
                normalized: (n as f64).powf(half_d) * sup / beta,
            }
        })
        .collect())
}

fn fft_sups(d: &StepDistribution, n_max: usize) -> Result<Vec<f64>> {
    for n in 2..=n_max {
        let cells = crate::lattice::Grid::cells(d.dim(), n as i32 * d.range());
        if cells > crate::lattice::FFT_CELL_CAP {
            return Err(Error::MemoryBudget {
                n,
                cells,
                cap: crate::lattice::FFT_CELL_CAP,
            });
        }
    }
    let base = d.field().to_float();
    let mut cur = base.clone();
    let mut out = vec![cur.iter_f64().map(|(_, v)| v).fold(0.0, f64::max)];
    for _ in 2..=n_max {
        cur = cur.convolve(&base)?;
        out.push(cur.iter_f64().map(|(_, v)| v).fold(0.0, f64::max));
    }
    Ok(out)
}

/// Exact n-fold convolution powers of the uniform box.
///
/// With `u` the lazy 1-d step uniform on `{-L..L}`, the punctured box satisfies
/// `M D = (2L+1)^d u^{(x)d} - delta_o`, so the number of n-step walks to `x` is
/// `sum_j C(n,j) (-1)^{n-j} prod_c T_j(x_c)` where `T_j(a)` counts j-step
/// lazy 1-d walks to `a`.
#[derive(Clone, Debug)]
pub struct BoxConvolution {
    dim: usize,
    range: i32,
    m: BigInt,
    // lazy[j][a] = T_j(a) for a >= 0
    lazy: Vec<Vec<BigInt>>,
    // lazy_prob[j][a] = T_j(a) / (2L+1)^j
    lazy_prob: Vec<Vec<f64>>,
}

impl BoxConvolution {
    pub fn new(dim: usize, range: i32, n_max: usize) -> Self {
        let side = 2 * range + 1;
        let mut lazy: Vec<Vec<BigInt>> = vec![vec![BigInt::one()]];
        for j in 1..=n_max {
            let prev = &lazy[j - 1];
            let width = j * range as usize;
            let get = |a: i64| -> BigInt {
                let a = a.unsigned_abs() as usize;
                prev.get(a).cloned().unwrap_or_else(BigInt::zero)
            };
            let row: Vec<BigInt> = (0..=width as i64)
                .map(|a| {
                    (-(range as i64)..=range as i64).fold(BigInt::zero(), |acc, b| acc + get(a - b))
                })
                .collect();
            lazy.push(row);
        }
        let lazy_prob = lazy
            .iter()
            .enumerate()
            .map(|(j, row)| {
                let scale = BigInt::from(side).pow(j as u32);
                row.iter()
                    .map(|t| rational_to_f64(&BigRational::new(t.clone(), scale.clone())))
                    .collect()
            })
            .collect();
        let m = BigInt::from(side).pow(dim as u32) - 1;
        BoxConvolution {
            dim,
            range,
            m,
            lazy,
            lazy_prob,
        }
    }

    fn t(&self, j: usize, a: i32) -> BigInt {
        self.lazy[j]
            .get(a.unsigned_abs() as usize)
            .cloned()
            .unwrap_or_else(BigInt::zero)
    }

    /// Number of n-step walks from o to x.
    pub fn count(&self, n: usize, x: &[i32]) -> BigInt {
        let mut total = BigInt::zero();
        let mut binom = BigInt::one();
        for j in 0..=n {
            if j > 0 {
                binom = binom * BigInt::from(n - j + 1) / BigInt::from(j);
            }
            let mut prod = binom.clone();
            for &c in x {
                prod *= self.t(j, c);
                if prod.is_zero() {
                    break;
                }
            }
            if (n - j) % 2 == 0 {
                total += prod;
            } else {
                total -= prod;
            }
        }
        total
    }

    /// `D^{*n}(x)` exactly.
    pub fn value(&self, n: usize, x: &[i32]) -> BigRational {
        BigRational::new(self.count(n, x), self.m.pow(n as u32))
    }

    /// Monotone upper bound: the same sum with every sign made positive.
    fn bound(&self, n: usize, a: &[i32], fill: i32) -> f64 {
        let side = (2 * self.range + 1) as f64;
        let ln_rho = self.dim as f64 * side.ln() - rational_to_f64(&BigRational::from_integer(self.m.clone())).ln();
        let ln_m = rational_to_f64(&BigRational::from_integer(self.m.clone())).ln();
        let mut total = 0.0;
        for j in 0..=n {
            let ln_w = ln_binomial(n, j) + j as f64 * ln_rho - (n - j) as f64 * ln_m;
            let mut prod = ln_w.exp();
            for c in 0..self.dim {
                let coord = if c < a.len() { a[c] } else { fill };
                prod *= self.lazy_prob[j].get(coord as usize).copied().unwrap_or(0.0);
            }
            total += prod;
        }
        total
    }

    /// `sup_x D^{*n}(x)` by a pruned search over sorted `|x|` tuples.
    pub fn sup(&self, n: usize) -> f64 {
        let mut best = 0.0f64;
        let mut a = Vec::with_capacity(self.dim);
        self.search(n, &mut a, &mut best);
        best
    }

    fn search(&self, n: usize, a: &mut Vec<i32>, best: &mut f64) {
        if a.len() == self.dim {
            let v = rational_to_f64(&self.value(n, a));
            if v > *best {
                *best = v;
            }
            return;
        }
        let start = a.last().copied().unwrap_or(0);
        let limit = n as i32 * self.range;
        for next in start..=limit {
            a.push(next);
            // remaining coordinates are >= next, so this bounds the subtree
            let ub = self.bound(n, a, next);
            if ub <= *best {
                a.pop();
                break;
            }
            self.search(n, a, best);
            a.pop();
        }
    }
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Continuum kernel `h` for `D(x) = h(x/L) / sum h(x/L)`.
#[derive(Clone, Debug, Serialize)]
pub struct ContinuumKernelSpec {
    pub name: String,
    pub dim: usize,
}

impl ContinuumKernelSpec {
    /// Only the uniform box `h(x) = 2^{-d} 1{|x|_inf <= 1}` is implemented.
    pub fn new(name: &str, dim: usize) -> Result<Self> {
        match name {
            "uniform-box" | "box" | "U" => Ok(ContinuumKernelSpec {
                name: "uniform-box".into(),
                dim,
            }),
            other => Err(Error::UnsupportedKernel(other.into())),
        }
    }

    /// `Sigma_h^2 = int |x|^2 h(x) dx = d/3`.
    pub fn sigma_h2(&self) -> f64 {
        self.dim as f64 / 3.0
    }

    /// `int h^2 = 2^{-d}`.
    pub fn h2_integral(&self) -> f64 {
        0.5f64.powi(self.dim as i32)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReturnRow {
    pub n: usize,
    /// `I_n = (1/2pi) int (sin t / t)^n dt`, exact
    pub i_n: f64,
    /// the same integral by adaptive Simpson on `[0, 200]`
    pub i_n_quadrature: f64,
    /// bound on the truncated tail `(1/pi) int_200^inf t^{-n} dt`
    pub quadrature_tail_bound: f64,
    /// `U^{*n}(o) = I_n^d`
    pub u_return: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuumMoments {
    pub sigma_h2: f64,
    pub h2_integral: f64,
    pub table: Vec<ReturnRow>,
}

impl ContinuumMoments {
    /// `L^{-d} sum_{n=2}^{N} U^{*n}(o)` over the rows present.
    pub fn first_order_sum(&self, dim: usize, range: i32) -> f64 {
        let beta = (range as f64).powi(-(dim as i32));
        beta * self.table.iter().filter(|r| r.n >= 2).map(|r| r.u_return).sum::<f64>()
    }
}

/// Moments of the continuum kernel and the return table `U^{*n}(o)`,
/// `n = 1..=n_max`.
pub fn continuum_moments(spec: &ContinuumKernelSpec, n_max: usize) -> Result<ContinuumMoments> {
    if spec.name != "uniform-box" {
        return Err(Error::UnsupportedKernel(spec.name.clone()));
    }
    let table = (1..=n_max)
        .map(|n| {
            let exact = rational_to_f64(&sinc_power_integral(n));
            let (quad, tail) = sinc_power_quadrature(n);
            ReturnRow {
                n,
                i_n: exact,
                i_n_quadrature: quad,
                quadrature_tail_bound: tail,
                u_return: exact.powi(spec.dim as i32),
            }
        })
        .collect();
    Ok(ContinuumMoments {
        sigma_h2: spec.sigma_h2(),
        h2_integral: spec.h2_integral(),
        table,
    })
}

/// `(1/2pi) int_R (sin t/t)^n dt`, the density at 0 of a sum of n uniforms
/// on `[-1, 1]`: `sum_k (-1)^k C(n,k) (n-2k)^{n-1} / (2^n (n-1)!)`.
pub fn sinc_power_integral(n: usize) -> BigRational {
    assert!(n >= 1);
    let mut sum = BigInt::zero();
    let mut binom = BigInt::one();
    for k in 0..=n / 2 {
        if k > 0 {
            binom = binom * BigInt::from(n - k + 1) / BigInt::from(k);
        }
        let base = BigInt::from(n as i64 - 2 * k as i64);
        let term = &binom * base.pow((n - 1) as u32);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    let fact: BigInt = (1..n).fold(BigInt::one(), |a, i| a * BigInt::from(i));
    BigRational::new(sum, BigInt::from(2).pow(n as u32) * fact)
}

/// Adaptive Simpson on `[0, 200]` with absolute tolerance 1e-12, plus the
/// tail bound from `|sinc t|^n <= t^{-n}`.
pub fn sinc_power_quadrature(n: usize) -> (f64, f64) {
    let f = |t: f64| {
        if t == 0.0 {
            1.0
        } else {
            (t.sin() / t).powi(n as i32)
        }
    };
    let upper = 200.0;
    let pieces = 200;
    let tol = 1e-12 / pieces as f64;
    let h = upper / pieces as f64;
    let integral: f64 = (0..pieces)
        .map(|i| adaptive_simpson(&f, i as f64 * h, (i + 1) as f64 * h, tol, 40))
        .sum();
    let tail = if n >= 2 {
        upper.powi(1 - n as i32) / ((n - 1) as f64 * PI)
    } else {
        f64::INFINITY
    };
    (integral / PI, tail)
}

pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let c = 0.5 * (a + b);
    let (fa, fb, fc) = (f(a), f(b), f(c));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_rec(f, a, b, fa, fb, fc, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fb: f64, fc: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let c = 0.5 * (a + b);
    let (d, e) = (0.5 * (a + c), 0.5 * (c + b));
    let (fd, fe) = (f(d), f(e));
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, c, fa, fc, fd, left, tol / 2.0, depth - 1) + simpson_rec(f, c, b, fc, fb, fe, right, tol / 2.0, depth - 1)
}

/// Mode-tagged `D` as a lattice field in the requested mode.
pub fn distribution_field(d: &StepDistribution, mode: Mode) -> LatticeField {
    match mode {
        Mode::Exact => d.field().clone(),
        Mode::Float => d.field().to_float(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn one_dimensional_two_point() {
        let d = StepDistribution::uniform_box(1, 1).unwrap();
        assert_eq!(d.steps(), &[Site(vec![-1]), Site(vec![1])]);
        assert_eq!(d.mass(&Site(vec![1])), r(1, 2));
        assert_eq!(d.sigma2(), &r(1, 1));
        assert_eq!(d.d_hat(&[0.0]), 1.0);
        assert!((d.d_hat(&[PI]) + 1.0).abs() < 1e-15);
        for i in 0..=40 {
            let k = -PI + 2.0 * PI * i as f64 / 40.0;
            assert!((d.d_hat(&[k]) - k.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn square_box_has_eight_sites() {
        let d = StepDistribution::uniform_box(2, 1).unwrap();
        assert_eq!(d.support_size(), 8);
        assert!(d.masses().iter().all(|m| *m == r(1, 8)));
    }

    #[test]
    fn five_dimensional_sigma2_matches_direct_loop() {
        let d = StepDistribution::uniform_box(5, 1).unwrap();
        assert_eq!(d.support_size(), 242);
        let mut total = 0i64;
        for a in -1..=1i64 {
            for b in -1..=1i64 {
                for c in -1..=1i64 {
                    for e in -1..=1i64 {
                        for f in -1..=1i64 {
                            total += a * a + b * b + c * c + e * e + f * f;
                        }
                    }
                }
            }
        }
        assert_eq!(d.sigma2(), &r(total, 242));
        assert_eq!(d.sigma2(), &r(405, 121));
    }

    #[test]
    fn zero_arguments_rejected() {
        assert!(StepDistribution::uniform_box(0, 1).is_err());
        assert!(StepDistribution::uniform_box(2, 0).is_err());
    }

    #[test]
    fn custom_masses_validated() {
        let mut m = BTreeMap::new();
        m.insert(Site(vec![1]), r(1, 2));
        m.insert(Site(vec![-1]), r(1, 2));
        assert!(StepDistribution::from_masses(1, 1, m.clone()).is_ok());
        m.insert(Site(vec![-1]), r(1, 3));
        m.insert(Site(vec![1]), r(2, 3));
        assert!(StepDistribution::from_masses(1, 1, m).is_err());
        let mut o = BTreeMap::new();
        o.insert(Site(vec![0]), r(1, 1));
        assert!(StepDistribution::from_masses(1, 1, o).is_err());
    }

    #[test]
    fn assumption_d_one_dimensional_edge() {
        let d = StepDistribution::uniform_box(1, 1).unwrap();
        let rep = verify_assumption_d(&d, 16, 0.5).unwrap();
        assert!((rep.max_one_minus_dhat - 2.0).abs() < 1e-12);
        assert!(rep.eta_high.abs() < 1e-12);
        assert!(rep.warnings.iter().any(|w| w.contains("2 - eta")));
        assert_eq!(rep.one_minus_dhat_at_zero, 0.0);
    }

    #[test]
    fn assumption_d_spread_out_square() {
        let d = StepDistribution::uniform_box(2, 5).unwrap();
        let rep = verify_assumption_d(&d, 32, 0.5).unwrap();
        assert!(rep.warnings.is_empty(), "{:?}", rep.warnings);
        assert!(rep.c1 > 0.0 && rep.c2 >= rep.c1);
        assert!(rep.eta_low > 0.0 && rep.eta_high > 0.0);
        assert!(rep.max_abs_imag < 1e-12);
        assert!(verify_assumption_d(&d, 4, 0.5).is_err());
    }

    #[test]
    fn heat_kernel_small_cases() {
        let d = StepDistribution::uniform_box(1, 1).unwrap();
        let rows = heat_kernel_profile(&d, 3, HeatKernelMethod::Auto).unwrap();
        assert_eq!(rows[0].sup, 0.5);
        assert_eq!(rows[1].sup, 0.5);
        assert_eq!(rows[2].sup, 0.375);
        let d2 = StepDistribution::uniform_box(2, 2).unwrap();
        let rows = heat_kernel_profile(&d2, 1, HeatKernelMethod::Separable).unwrap();
        assert!((rows[0].sup - 1.0 / 24.0).abs() < 1e-16);
    }

    #[test]
    fn separable_matches_fft() {
        let d = StepDistribution::uniform_box(2, 1).unwrap();
        let a = heat_kernel_profile(&d, 10, HeatKernelMethod::Separable).unwrap();
        let b = heat_kernel_profile(&d, 10, HeatKernelMethod::Fft).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.sup - y.sup).abs() < 1e-13, "n={} {} {}", x.n, x.sup, y.sup);
        }
    }

    #[test]
    fn separable_counts_match_direct_convolution() {
        let d = StepDistribution::uniform_box(2, 2).unwrap();
        let eval = BoxConvolution::new(2, 2, 3);
        let mut cur = d.field().clone();
        for n in 2..=3 {
            cur = cur.convolve(d.field()).unwrap();
            for (s, v) in cur.exact_entries().unwrap() {
                assert_eq!(&eval.value(n, s.coords()), v);
            }
            assert!(eval.value(n, &[2 * n as i32 + 1, 0]).is_zero());
        }
    }

    #[test]
    fn fft_path_reports_offending_n() {
        let d = StepDistribution::uniform_box(5, 3).unwrap();
        match heat_kernel_profile(&d, 50, HeatKernelMethod::Fft) {
            Err(Error::MemoryBudget { n, .. }) => assert_eq!(n, 6),
            other => panic!("expected memory budget error, got {other:?}"),
        }
    }

    #[test]
    fn continuum_box_values() {
        let spec = ContinuumKernelSpec::new("uniform-box", 5).unwrap();
        assert!((spec.sigma_h2() - 5.0 / 3.0).abs() < 1e-15);
        assert!(ContinuumKernelSpec::new("gaussian", 5).is_err());
        assert_eq!(sinc_power_integral(2), r(1, 2));
        assert_eq!(sinc_power_integral(3), r(3, 8));
        let m = continuum_moments(&spec, 12).unwrap();
        assert!((m.table[1].u_return - 1.0 / 32.0).abs() < 1e-16);
        for w in m.table.windows(2).skip(1) {
            assert!(w[1].u_return < w[0].u_return);
        }
        for row in m.table.iter().filter(|r| r.n >= 2) {
            assert!(
                (row.i_n - row.i_n_quadrature).abs() <= row.quadrature_tail_bound + 1e-11,
                "n = {}: {} vs {}",
                row.n,
                row.i_n,
                row.i_n_quadrature
            );
        }
    }
}
