//! tau-scaling of the critical point, the leading constant, the Gaussian
//! collapse diagnostic and the first-order critical point for the box kernel.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::dist::{continuum_moments, ContinuumKernelSpec, StepDistribution};
use crate::error::{Error, Result};
use crate::expansion::{effective_diffusion, fourier_c_sequence, block_geometric_tail, geometric_tail, solve_pc_fixed_point, EffectiveDiffusion, PcMethod, TailPolicy, Truncation};
use crate::lattice::{format_rational, rational_to_f64, Site};
use crate::pi::{pi_coefficient, PiSeries};
use crate::transfer::{transfer_matrix_mu, TransferOptions};
use crate::walk::{two_point_tables, Budget, Memory};

#[derive(Clone, Debug, Serialize)]
pub struct TheoremConstant {
    pub value: f64,
    pub warning: Option<String>,
}

/// `A(d, L) = (2/(d-2)) (d / (2 pi Sigma_h^2))^{d/2} L^{-d}`.
pub fn theorem_constant(dim: usize, range: i32, sigma_h2: f64) -> Result<TheoremConstant> {
    if !(sigma_h2 > 0.0) {
        return Err(Error::InvalidArgument(format!("Sigma_h^2 must be positive, got {sigma_h2}")));
    }
    if dim <= 2 || range < 1 {
        return Err(Error::InvalidArgument(format!("needs d > 2 and L >= 1, got d = {dim}, L = {range}")));
    }
    let d = dim as f64;
    let value = 2.0 / (d - 2.0) * (d / (2.0 * std::f64::consts::PI * sigma_h2)).powf(d / 2.0) * (range as f64).powf(-d);
    let warning = (dim <= 4).then(|| format!("d = {dim} <= 4: the formula is evaluated outside its regime"));
    Ok(TheoremConstant { value, warning })
}

#[derive(Clone, Debug, Serialize)]
pub struct TailTerm {
    pub n: usize,
    /// `(D * C_{1,n-1})(o)`
    pub via_two_point: String,
    /// `pi-hat^(1)_{1,n}` of the self-avoiding walk
    pub via_pi: String,
    pub agree: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TailPi1 {
    pub tau: u32,
    pub p: f64,
    pub n_max: usize,
    /// `sum_{n=tau+1}^{n_max} p^n (D * C_{1,n-1})(o)`
    pub value: f64,
    pub tail_bound: f64,
    pub terms: Vec<TailTerm>,
}

/// The one-loop tail `sum_{n > tau} pi-hat^(1)_{p,n}` of the self-avoiding
/// walk, computed from two-point tables and cross-checked against direct
/// one-edge lace enumeration.
pub fn tail_pi1_sum(d: &StepDistribution, p: f64, tau: u32, n_max: usize, budget: &Budget) -> Result<TailPi1> {
    if n_max < 4 {
        return Err(Error::InvalidArgument("tail sum needs n_max >= 4".into()));
    }
    let c = two_point_tables(d, Memory::Infinite, n_max - 1, budget)?;
    let mut terms = Vec::new();
    let mut scaled = Vec::new();
    let mut value = 0.0;
    for n in 2..=n_max {
        let loop_back = d.field().convolve(&c[n - 1].values)?;
        let a = loop_back.get_exact(&Site::origin(d.dim())).expect("exact");
        let b = pi_coefficient(d, Memory::Infinite, 1, n, budget)?.hat_zero();
        let term = p.powi(n as i32) * rational_to_f64(&a);
        scaled.push(term);
        if n > tau as usize {
            value += term;
        }
        terms.push(TailTerm {
            n,
            agree: a == b,
            via_two_point: format_rational(&a),
            via_pi: format_rational(&b),
        });
    }
    // odd lengths can vanish identically, so bound along even and odd n
    let even: Vec<f64> = scaled.iter().step_by(2).copied().collect();
    let odd: Vec<f64> = scaled.iter().skip(1).step_by(2).copied().collect();
    let bound_of = |s: &[f64]| -> Result<f64> {
        if s.iter().all(|x| *x == 0.0) {
            Ok(0.0)
        } else {
            geometric_tail(s)
        }
    };
    let tail_bound = if even.len() >= 3 && odd.len() >= 3 {
        bound_of(&even)? + bound_of(&odd)?
    } else {
        block_geometric_tail(&scaled, 2)?
    };
    Ok(TailPi1 {
        tau,
        p,
        n_max,
        value,
        tail_bound,
        terms,
    })
}

#[derive(Clone, Debug)]
pub enum ScanMethod {
    TransferMatrix(TransferOptions),
    FixedPoint { truncation: Truncation, tol: f64, budget: Budget },
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub tau: u32,
    pub pc_estimate: Option<f64>,
    pub method: PcMethod,
    /// `p_c^{2 tau} - p_c^tau` when both are in the scan
    pub diff: Option<f64>,
    pub log_tau: f64,
    pub log_diff: Option<f64>,
    pub error: Option<String>,
}

/// `p_c^tau` for each tau, in increasing tau; failures are recorded per row.
pub fn scaling_scan(d: &StepDistribution, tau_list: &[u32], method: &ScanMethod) -> Result<Vec<ScanRow>> {
    if tau_list.is_empty() {
        return Err(Error::InvalidArgument("tau list is empty".into()));
    }
    let mut taus = tau_list.to_vec();
    taus.sort_unstable();
    taus.dedup();
    let mut rows: Vec<ScanRow> = taus
        .iter()
        .map(|&tau| {
            let (pc, method_tag) = match method {
                ScanMethod::TransferMatrix(opts) => (
                    transfer_matrix_mu(d, Memory::Finite(tau), *opts).map(|r| r.pc()),
                    PcMethod::TransferMatrix,
                ),
                ScanMethod::FixedPoint { truncation, tol, budget } => (
                    PiSeries::compute(d, Memory::Finite(tau), truncation.n_max, Some(truncation.order_max), budget)
                        .and_then(|pi| solve_pc_fixed_point(&pi, *truncation, *tol))
                        .map(|e| e.value),
                    PcMethod::FixedPoint,
                ),
            };
            ScanRow {
                tau,
                pc_estimate: pc.as_ref().ok().copied(),
                method: method_tag,
                diff: None,
                log_tau: (tau as f64).ln(),
                log_diff: None,
                error: pc.err().map(|e| e.to_string()),
            }
        })
        .collect();
    let lookup: Vec<(u32, Option<f64>)> = rows.iter().map(|r| (r.tau, r.pc_estimate)).collect();
    for row in rows.iter_mut() {
        let double = lookup.iter().find(|(t, _)| *t == 2 * row.tau).and_then(|(_, pc)| *pc);
        if let (Some(a), Some(b)) = (row.pc_estimate, double) {
            let diff = b - a;
            row.diff = Some(diff);
            row.log_diff = (diff > 0.0).then(|| diff.ln());
        }
    }
    Ok(rows)
}

/// `tau,pc_estimate,method,diff,log_tau,log_diff` rows.
pub fn scan_csv(rows: &[ScanRow]) -> String {
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let mut out = String::from("tau,pc_estimate,method,diff,log_tau,log_diff\n");
    for r in rows {
        let method = match r.method {
            PcMethod::TransferMatrix => "transfer-matrix",
            PcMethod::FixedPoint => "fixed-point",
            PcMethod::SeriesBound => "series-bound",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.tau,
            opt(r.pc_estimate),
            method,
            opt(r.diff),
            r.log_tau,
            opt(r.log_diff)
        ));
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub residual_norm: f64,
    pub points: usize,
}

/// Least squares of `log diff` against `log tau` over rows with positive
/// differences.
pub fn fit_exponent(rows: &[ScanRow]) -> Result<FitResult> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.diff.filter(|d| *d > 0.0).map(|d| ((r.tau as f64).ln(), d.ln())))
        .collect();
    if pts.len() < 3 {
        return Err(Error::TooFewPoints(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all tau values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_norm = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(FitResult {
        slope,
        intercept,
        residual_norm,
        points: pts.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CollapseRow {
    pub n: usize,
    pub k: f64,
    /// `k / sqrt(v sigma^2 n)`
    pub kappa: f64,
    /// `C-hat_{p,n}(kappa e_1) / C-hat_{p,n}(0)`
    pub value: f64,
    /// `exp(-k^2 / 2d)`
    pub target: f64,
    pub deviation: f64,
    /// `kappa L > 1`: outside the small-k window
    pub flagged: bool,
}

/// Compares the rescaled `C-hat_{p,n}` with the Gaussian profile.
pub fn gaussian_collapse(
    d: &StepDistribution,
    p: f64,
    n_list: &[usize],
    k_list: &[f64],
    diffusion: &EffectiveDiffusion,
    pi: Option<&PiSeries>,
) -> Result<Vec<CollapseRow>> {
    let n_top = n_list.iter().copied().max().unwrap_or(0);
    let dim = d.dim();
    let sigma2 = d.sigma2_f64();
    let order_max = diffusion.truncation.order_max;
    let sequence_at = |k: &[f64]| -> Result<Vec<f64>> {
        let pi_hat = pi.map(|s| s.hat_p(p, k, order_max)).unwrap_or_default();
        let pi_hat: Vec<f64> = pi_hat.into_iter().take(diffusion.truncation.n_max + 1).collect();
        fourier_c_sequence(p, d.d_hat(k), &pi_hat, n_top, TailPolicy::Drop)
    };
    let zero = sequence_at(&vec![0.0; dim])?;
    let mut rows = Vec::new();
    for &n in n_list {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be >= 1".into()));
        }
        for &k in k_list {
            let kappa = k / (diffusion.v * sigma2 * n as f64).sqrt();
            let mut kv = vec![0.0; dim];
            kv[0] = kappa;
            let seq = sequence_at(&kv)?;
            let value = seq[n] / zero[n];
            let target = (-k * k / (2.0 * dim as f64)).exp();
            rows.push(CollapseRow {
                n,
                k,
                kappa,
                value,
                target,
                deviation: (value - target).abs(),
                flagged: kappa * d.range() as f64 > 1.0,
            });
        }
    }
    Ok(rows)
}

/// Effective diffusion at the truncated critical point.
pub fn diffusion_at_critical(d: &StepDistribution, pi: &PiSeries, trunc: Truncation, tol: f64) -> Result<EffectiveDiffusion> {
    let pc = solve_pc_fixed_point(pi, trunc, tol)?;
    effective_diffusion(d, pc.value, pi, trunc)
}

#[derive(Clone, Debug, Serialize)]
pub struct FirstOrderPrediction {
    pub dim: usize,
    pub range: i32,
    pub n_terms: usize,
    /// `1 + L^{-d} sum_{n=2}^{N} U^{*n}(o)`
    pub value: f64,
    /// `L^{-d} U^{*2}(o) = L^{-d} 2^{-d}`
    pub first_term: f64,
    /// geometric estimate of the dropped terms
    pub tail_estimate: f64,
}

/// `p_c ~ 1 + L^{-d} sum_{n>=2} U^{*n}(o)` for the box kernel.
pub fn pc_first_order_prediction(dim: usize, range: i32, n_terms: usize) -> Result<FirstOrderPrediction> {
    if n_terms < 2 || range < 1 {
        return Err(Error::InvalidArgument("needs N >= 2 and L >= 1".into()));
    }
    let spec = ContinuumKernelSpec::new("uniform-box", dim)?;
    let m = continuum_moments(&spec, n_terms)?;
    let beta = (range as f64).powi(-(dim as i32));
    let terms: Vec<f64> = m.table.iter().filter(|r| r.n >= 2).map(|r| beta * r.u_return).collect();
    let tail_estimate = if terms.len() >= 3 { geometric_tail(&terms).unwrap_or(f64::INFINITY) } else { f64::INFINITY };
    Ok(FirstOrderPrediction {
        dim,
        range,
        n_terms,
        value: 1.0 + m.first_order_sum(dim, range),
        first_term: terms[0],
        tail_estimate,
    })
}

/// Exact `(M - 1)/M` for the uniform box.
pub fn memory_two_mu(d: &StepDistribution) -> BigRational {
    let m = BigInt::from(d.support_size());
    BigRational::new(&m - BigInt::one(), m)
}

/// `p_c^tau` from `mu`, keeping zero out of the division.
pub fn pc_from_mu(mu: f64) -> Result<f64> {
    if mu.is_zero() {
        return Err(Error::Divergent(f64::INFINITY));
    }
    Ok(1.0 / mu)
}
