//! The lace-expansion recursion, Fourier-side sequences, the Green function,
//! the tail identity and the fixed-point critical point.

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::dist::StepDistribution;
use crate::error::{Error, Result};
use crate::lattice::{format_rational, LatticeField, Mode};
use crate::pi::PiSeries;
use crate::walk::{two_point_tables, Budget, Memory, TwoPointTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailPolicy {
    Drop,
    GeometricBound,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Truncation {
    pub order_max: usize,
    pub n_max: usize,
    pub tail_policy: TailPolicy,
}

impl Truncation {
    pub fn new(order_max: usize, n_max: usize, tail_policy: TailPolicy) -> Result<Self> {
        if order_max < 1 || n_max < 2 {
            return Err(Error::InvalidArgument(format!(
                "truncation needs N_max >= 1 and n_max >= 2, got {order_max} and {n_max}"
            )));
        }
        Ok(Truncation {
            order_max,
            n_max,
            tail_policy,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PcMethod {
    TransferMatrix,
    FixedPoint,
    SeriesBound,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalPointEstimate {
    pub value: f64,
    pub tau: Memory,
    pub method: PcMethod,
    pub truncation: Option<Truncation>,
    pub bracket: Option<(f64, f64)>,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RecursionRow {
    pub n: usize,
    /// `max_x |C_{n+1}(x) - RHS(x)|`
    pub residual: String,
    pub exact_zero: bool,
}

/// Both sides of `C_{n+1} = D * C_n + sum_{m=2}^{n+1} pi_m * C_{n+1-m}` at
/// `p = 1`, for every `n <= n_max`.
pub fn verify_recursion(d: &StepDistribution, tau: Memory, n_max: usize, budget: &Budget) -> Result<Vec<RecursionRow>> {
    let c = two_point_tables(d, tau, n_max + 1, budget)?;
    let pi = PiSeries::compute(d, tau, n_max + 1, None, budget)?;
    verify_recursion_with(d, &c, &pi, n_max)
}

/// As [`verify_recursion`] with precomputed tables.
pub fn verify_recursion_with(d: &StepDistribution, c: &[TwoPointTable], pi: &PiSeries, n_max: usize) -> Result<Vec<RecursionRow>> {
    if c.len() < n_max + 2 {
        return Err(Error::InvalidArgument("two-point tables too short".into()));
    }
    let signed: Vec<LatticeField> = (0..=n_max + 1)
        .map(|m| {
            if m < 2 {
                Ok(LatticeField::zero(d.dim(), Mode::Exact))
            } else {
                pi.signed(m, usize::MAX)
            }
        })
        .collect::<Result<_>>()?;
    let one = BigRational::from_integer(1.into());
    let mut rows = Vec::new();
    for n in 0..=n_max {
        let mut rhs = d.field().convolve(&c[n].values)?;
        for m in 2..=n + 1 {
            if signed[m].is_empty() {
                continue;
            }
            let term = signed[m].convolve(&c[n + 1 - m].values)?;
            rhs = rhs.add_scaled_exact(&term, &one)?;
        }
        let residual = c[n + 1].values.max_abs_diff_exact(&rhs)?;
        rows.push(RecursionRow {
            n,
            exact_zero: residual.is_zero(),
            residual: format_rational(&residual),
        });
    }
    Ok(rows)
}

/// `C-hat_{p,n}(k)` for `n = 0..=n_max` from the Fourier recursion, given
/// `d_hat = D-hat(k)` and `pi_hat[m] = pi-hat_{p,m}(k)`.
pub fn fourier_c_sequence(p: f64, d_hat: f64, pi_hat: &[f64], n_max: usize, policy: TailPolicy) -> Result<Vec<f64>> {
    if policy == TailPolicy::GeometricBound && pi_hat.len() < n_max + 1 {
        return Err(Error::MissingPi(pi_hat.len()));
    }
    let pi_at = |m: usize| pi_hat.get(m).copied().unwrap_or(0.0);
    let mut c = Vec::with_capacity(n_max + 1);
    c.push(1.0);
    for n in 0..n_max {
        let mut next = p * d_hat * c[n];
        for m in 2..=n + 1 {
            next += pi_at(m) * c[n + 1 - m];
        }
        c.push(next);
    }
    Ok(c)
}

/// `1 / (1 - p D-hat(k) - Pi-hat_p(k))`.
pub fn g_hat(p: f64, d_hat: f64, big_pi_hat: f64) -> Result<f64> {
    let denom = 1.0 - p * d_hat - big_pi_hat;
    if denom <= 0.0 {
        return Err(Error::NonpositiveDenominator(denom));
    }
    Ok(1.0 / denom)
}

/// Geometric bound on `sum_{n > last} |a_n|` from the last three terms.
pub fn geometric_tail(terms: &[f64]) -> Result<f64> {
    let n = terms.len();
    if n < 3 {
        return Err(Error::TooFewPoints(n));
    }
    let a: Vec<f64> = terms[n - 3..].iter().map(|x| x.abs()).collect();
    if a[2] == 0.0 && a[1] == 0.0 {
        return Ok(0.0);
    }
    let mut ratio: f64 = 0.0;
    for (x, y) in [(a[1], a[0]), (a[2], a[1])] {
        if y > 0.0 {
            ratio = ratio.max(x / y);
        } else if x > 0.0 {
            ratio = f64::INFINITY;
        }
    }
    if !(ratio < 1.0) {
        return Err(Error::TailNotConvergent(ratio));
    }
    Ok(a[2] * ratio / (1.0 - ratio))
}

/// Tail bound for sequences that may oscillate: with `M_j` the largest
/// `|a_n|` in the j-th block of `block` terms from the end, the ratio
/// `r = M_last / M_prev` bounds the tail by `block M_last r / (1 - r)`.
pub fn block_geometric_tail(terms: &[f64], block: usize) -> Result<f64> {
    if block == 0 || terms.len() < 2 * block {
        return Err(Error::TooFewPoints(terms.len()));
    }
    let n = terms.len();
    let peak = |s: &[f64]| s.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let last = peak(&terms[n - block..]);
    let prev = peak(&terms[n - 2 * block..n - block]);
    if last == 0.0 {
        return Ok(0.0);
    }
    let ratio = if prev > 0.0 { last / prev } else { f64::INFINITY };
    if !(ratio < 1.0) {
        return Err(Error::TailNotConvergent(ratio));
    }
    Ok(block as f64 * last * ratio / (1.0 - ratio))
}

#[derive(Clone, Debug, Serialize)]
pub struct TailIdentityReport {
    pub tau: u32,
    pub p: f64,
    pub k: Vec<f64>,
    pub n_max: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `sum_{n>=tau} C-hat_n = G-hat [C-hat_tau - pi-hat_tau + E-hat]` with the
/// left side cut at `n_max` and the right side built from the same `pi`.
pub fn tail_identity_check(
    d: &StepDistribution,
    tau: u32,
    p: f64,
    k: &[f64],
    pi: &PiSeries,
    order_max: usize,
    n_max: usize,
) -> Result<TailIdentityReport> {
    if tau < 2 {
        return Err(Error::InvalidArgument("the tail identity needs tau >= 2".into()));
    }
    if n_max <= tau as usize + 3 {
        return Err(Error::InvalidArgument("n_max must exceed tau + 3".into()));
    }
    let tau_u = tau as usize;
    let dh = d.d_hat(k);
    let pi_hat = pi.hat_p(p, k, order_max);
    let c = fourier_c_sequence(p, dh, &pi_hat, n_max, TailPolicy::Drop)?;
    let pi_at = |m: usize| pi_hat.get(m).copied().unwrap_or(0.0);
    let big_pi: f64 = pi_hat.iter().sum();
    let lhs: f64 = c[tau_u..].iter().sum();
    let bound = block_geometric_tail(&c, 4)?;
    let mut e = 0.0;
    for m in 2..tau_u {
        for n in tau_u + 1 - m..tau_u {
            e += pi_at(m) * c[n];
        }
    }
    for m in tau_u..pi_hat.len() {
        for n in 0..tau_u {
            e += pi_at(m) * c[n];
        }
    }
    let g = g_hat(p, dh, big_pi)?;
    let rhs = g * (c[tau_u] - pi_at(tau_u) + e);
    let residual = (lhs - rhs).abs();
    Ok(TailIdentityReport {
        tau,
        p,
        k: k.to_vec(),
        n_max,
        lhs,
        rhs,
        residual,
        bound,
        pass: residual <= bound + 1e-9,
    })
}

/// Iterates `p <- 1 - Pi-hat_p(0)` from `p = 1`.
pub fn solve_pc_fixed_point(pi: &PiSeries, trunc: Truncation, tol: f64) -> Result<CriticalPointEstimate> {
    let order_max = trunc.order_max;
    let restricted = |p: f64| -> f64 {
        pi.tables()
            .filter(|t| t.order <= order_max && t.n <= trunc.n_max)
            .map(|t| {
                let sign = if t.order % 2 == 0 { 1.0 } else { -1.0 };
                sign * p.powi(t.n as i32) * crate::lattice::rational_to_f64(&t.hat_zero())
            })
            .sum()
    };
    let mut p = 1.0;
    let mut damping = 1.0;
    let mut last_step = 0.0f64;
    for it in 1..=1000 {
        let target = 1.0 - restricted(p);
        let step = target - p;
        if step * last_step < 0.0 && step.abs() > 0.5 * last_step.abs() {
            damping = 0.5;
        }
        let next = p + damping * step;
        if !(0.5..=2.0).contains(&next) || !next.is_finite() {
            return Err(Error::Divergent(next));
        }
        if (next - p).abs() < tol {
            return Ok(CriticalPointEstimate {
                value: next,
                tau: pi.tau,
                method: PcMethod::FixedPoint,
                truncation: Some(trunc),
                bracket: None,
                iterations: it,
            });
        }
        last_step = step;
        p = next;
    }
    Err(Error::NoConvergence { iterations: 1000 })
}

#[derive(Clone, Debug, Serialize)]
pub struct EffectiveDiffusion {
    pub sigma_j2: f64,
    pub v: f64,
    pub p: f64,
    pub truncation: Truncation,
}

/// `sigma_J^2 = p sigma^2 + sum |x|^2 Pi_p(x)` and
/// `v = (sigma^2 + p^{-1} sum |x|^2 Pi_p(x)) / (sigma^2 (1 + d/dp Pi-hat_p))`.
pub fn effective_diffusion(d: &StepDistribution, p: f64, pi: &PiSeries, trunc: Truncation) -> Result<EffectiveDiffusion> {
    if p <= 0.0 {
        return Err(Error::InvalidArgument("p must be positive".into()));
    }
    if pi.n_max < trunc.n_max.min(2) {
        return Err(Error::MissingPi(trunc.n_max));
    }
    let sigma2 = d.sigma2_f64();
    let mut moment = 0.0;
    let mut deriv = 0.0;
    for t in pi.tables().filter(|t| t.order <= trunc.order_max && t.n <= trunc.n_max) {
        let sign = if t.order % 2 == 0 { 1.0 } else { -1.0 };
        moment += sign * p.powi(t.n as i32) * crate::lattice::rational_to_f64(&t.second_moment());
        deriv += sign * t.n as f64 * p.powi(t.n as i32 - 1) * crate::lattice::rational_to_f64(&t.hat_zero());
    }
    Ok(EffectiveDiffusion {
        sigma_j2: p * sigma2 + moment,
        v: (sigma2 + moment / p) / (sigma2 * (1.0 + deriv)),
        p,
        truncation: trunc,
    })
}

/// `true` when `|a - b| <= tol`, for exact comparisons in reports.
pub fn rational_close(a: &BigRational, b: &BigRational, tol: &BigRational) -> bool {
    (a - b).abs() <= *tol
}
