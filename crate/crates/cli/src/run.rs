use std::f64::consts::FRAC_PI_2;

use lacewalk::asymptotics::{
    fit_exponent, gaussian_collapse, pc_first_order_prediction, scaling_scan, theorem_constant, ScanMethod,
};
use lacewalk::dist::{continuum_moments, heat_kernel_profile, verify_assumption_d, ContinuumKernelSpec, HeatKernelMethod};
use lacewalk::expansion::{
    effective_diffusion, solve_pc_fixed_point, tail_identity_check, verify_recursion, TailPolicy, Truncation,
};
use lacewalk::lace::partition_check;
use lacewalk::lattice::{format_rational, rational_to_f64};
use lacewalk::report::{CheckReport, Document};
use lacewalk::transfer::{transfer_matrix_mu, TransferOptions};
use lacewalk::walk::two_point_tables;
use lacewalk::{Budget, Error, Memory, PiSeries, Result, StepDistribution};
use serde_json::json;

use crate::config::{JobConfig, Method, Suite};

/// Largest walk length used on the left side of the tail identity.
const TAIL_N: usize = 400;

pub fn execute(command: &str, cfg: &JobConfig) -> Result<Document> {
    let d = StepDistribution::uniform_box(cfg.d, cfg.l)?;
    let mut doc = Document::new(command, cfg);
    match command {
        "dist-check" => dist_check(&d, cfg, &mut doc)?,
        "enumerate" => enumerate(&d, cfg, &mut doc)?,
        "pi" => pi(&d, cfg, &mut doc)?,
        "verify" => verify(&d, cfg, &mut doc)?,
        "pc" => pc(&d, cfg, &mut doc)?,
        "scan" => scan(&d, cfg, &mut doc)?,
        "clt" => clt(&d, cfg, &mut doc)?,
        "const" => constants(cfg, &mut doc)?,
        other => return Err(Error::InvalidArgument(format!("unknown command {other}"))),
    }
    Ok(doc)
}

fn transfer_options(cfg: &JobConfig) -> TransferOptions {
    TransferOptions {
        tol: cfg.tol,
        symmetry_reduction: cfg.d >= 2,
        ..TransferOptions::default()
    }
}

/// Default truncation for the fixed point: two lace orders and walks up to
/// `2 tau` (or 4 without memory cutoff).
fn fixed_point_truncation(cfg: &JobConfig, tau: Memory) -> Result<Truncation> {
    let n_max = cfg.nmax.unwrap_or(match tau {
        Memory::Finite(t) => (2 * t as usize).max(2),
        Memory::Infinite => 4,
    });
    Truncation::new(cfg.order_max.unwrap_or(2), n_max, TailPolicy::Drop)
}

fn dist_check(d: &StepDistribution, cfg: &JobConfig, doc: &mut Document) -> Result<()> {
    let resolution = (((2e5f64).powf(1.0 / cfg.d as f64)) as usize).saturating_sub(1).clamp(8, 256);
    let cost = ((resolution + 1) as f64).powi(cfg.d as i32) * d.support_size() as f64;
    if cost > 5e9 {
        return Err(Error::BudgetExceeded {
            estimated_nodes: cost,
            cap: 5e9,
        });
    }
    let a = verify_assumption_d(d, resolution, 0.5)?;
    doc.reports.push(
        CheckReport::new("assumption-d", a.warnings.len(), 0, !a.has_violation())
            .param("grid_resolution", resolution)
            .param("c1", a.c1)
            .param("c2", a.c2)
            .param("eta_low", a.eta_low)
            .param("eta_high", a.eta_high)
            .param("warnings", &a.warnings),
    );
    let n_max = cfg.nmax.unwrap_or(50);
    let rows = heat_kernel_profile(d, n_max, HeatKernelMethod::Auto)?;
    if let Some(at5) = rows.iter().find(|r| r.n == 5).map(|r| r.normalized) {
        let top = rows.iter().filter(|r| r.n >= 5).map(|r| r.normalized).fold(0.0, f64::max);
        doc.reports.push(
            CheckReport::new("heat-kernel", top / at5, 2, top <= 2.0 * at5)
                .param("n_max", n_max)
                .param("value_at_5", at5),
        );
    }
    doc.summarize("sigma2_over_l2", a.sigma2_over_l2);
    doc.summarize("sup_mass_over_beta", a.sup_mass_over_beta);
    doc.summarize("moment_2_plus_2eps", a.moment_2_plus_2eps);
    doc.summarize("max_abs_imag", a.max_abs_imag);
    for r in rows {
        doc.row(r);
    }
    Ok(())
}

fn enumerate(d: &StepDistribution, cfg: &JobConfig, doc: &mut Document) -> Result<()> {
    let tables = two_point_tables(d, cfg.tau, cfg.nmax.unwrap_or(10), &Budget::default())?;
    for t in &tables {
        let c = t.total();
        let mu_bound = (t.n > 0).then(|| rational_to_f64(&c).powf(1.0 / t.n as f64));
        doc.row(json!({
            "n": t.n,
            "c_n": format_rational(&c),
            "count": t.unweighted_count(d).map(|v| v.to_string()),
            "mu_bound": mu_bound,
        }));
    }
    doc.summarize("support", d.support_size());
    Ok(())
}

fn pi(d: &StepDistribution, cfg: &JobConfig, doc: &mut Document) -> Result<()> {
    let series = PiSeries::compute(d, cfg.tau, cfg.nmax.unwrap_or(6), cfg.order_max, &Budget::default())?;
    for (order, n, value) in series.hat_zero_strings() {
        doc.summarize(&format!("pi_hat_zero[{order},{n}]"), value);
    }
    for r in series.rows() {
        doc.row(r);
    }
    Ok(())
}

fn verify(d: &StepDistribution, cfg: &JobConfig, doc: &mut Document) -> Result<()> {
    let n_max = cfg.nmax.unwrap_or(6);
    let budget = Budget::default();
    let wants = |s: Suite| cfg.suite == Suite::All || cfg.suite == s;
    if wants(Suite::Recursion) {
        for r in verify_recursion(d, cfg.tau, n_max, &budget)? {
            doc.reports
                .push(CheckReport::new("recursion", &r.residual, "0", r.exact_zero).param("n", r.n));
        }
    }
    if wants(Suite::Tail) {
        match cfg.tau {
            Memory::Finite(tau) if tau >= 2 => {
                let series = PiSeries::compute(d, cfg.tau, n_max, cfg.order_max, &budget)?;
                let p = cfg.p.unwrap_or(0.3);
                for k1 in [0.0, FRAC_PI_2] {
                    let mut k = vec![0.0; cfg.d];
                    k[0] = k1;
                    let r = tail_identity_check(d, tau, p, &k, &series, cfg.order_max.unwrap_or(usize::MAX), TAIL_N)?;
                    doc.reports.push(
                        CheckReport::new("tail-identity", r.residual, r.bound + 1e-9, r.pass)
                            .param("p", p)
                            .param("k1", k1)
                            .param("lhs", r.lhs)
                            .param("rhs", r.rhs),
                    );
                }
            }
            _ if cfg.suite == Suite::Tail => {
                return Err(Error::InvalidArgument(format!("the tail identity needs a finite tau >= 2, got {}", cfg.tau)))
            }
            _ => doc.summarize("tail", "skipped: needs a finite tau >= 2"),
        }
    }
    if wants(Suite::Lace) {
        for b in 1..=n_max as u32 {
            match partition_check(cfg.tau, b) {
                Ok(c) => doc.reports.push(
                    CheckReport::new("lace-partition", c.mismatches, 0, c.mismatches == 0)
                        .param("length", b)
                        .param("connected_graphs", c.connected_graphs)
                        .param("laces", c.laces),
                ),
                Err(_) => {
                    doc.summarize("lace_partition_max_length", b - 1);
                    break;
                }
            }
        }
    }
    Ok(())
}

fn taus(cfg: &JobConfig) -> Vec<Memory> {
    if cfg.tau_list.is_empty() {
        vec![cfg.tau]
    } else {
        cfg.tau_list.iter().map(|&t| Memory::Finite(t)).collect()
    }
}

fn pc(d: &StepDistribution, cfg: &JobConfig, doc: &mut Document) -> Result<()> {
    for tau in taus(cfg) {
        eprintln!("  pc at tau={tau}");
        match cfg.method {
            Method::Transfer => {
                let r = transfer_matrix_mu(d, tau, transfer_options(cfg))?;
                doc.row(json!({
                    "tau": tau,
                    "method": "transfer-matrix",
                    "pc": r.pc(),
                    "mu": r.mu,
                    "lower": r.lower,
                    "upper": r.upper,
                    "states": r.states,
                    "transitions": r.transitions,
                    "iterations": r.iterations,
                }));
            }
            Method::FixedPoint => {
                let trunc = fixed_point_truncation(cfg, tau)?;
                let series = PiSeries::compute(d, tau, trunc.n_max, Some(trunc.order_max), &Budget::default())?;
                let e = solve_pc_fixed_point(&series, trunc, cfg.tol)?;
                doc.row(json!({
                    "tau": tau,
                    "method": "fixed-point",
                    "pc": e.value,
                    "iterations": e.iterations,
                }));
                doc.summarize("truncation", trunc);
            }
        }
    }
    Ok(())
}

fn scan(d: &StepDistribution, cfg: &JobConfig, doc: &mut Document) -> Result<()> {
    let method = match cfg.method {
        Method::Transfer => ScanMethod::TransferMatrix(transfer_options(cfg)),
        Method::FixedPoint => ScanMethod::FixedPoint {
            truncation: Truncation::new(cfg.order_max.unwrap_or(2), cfg.nmax.unwrap_or(4), TailPolicy::Drop)?,
            tol: cfg.tol,
            budget: Budget::default(),
        },
    };
    let rows = scaling_scan(d, &cfg.tau_list, &method)?;
    let missing: Vec<u32> = rows.iter().filter(|r| r.pc_estimate.is_none()).map(|r| r.tau).collect();
    doc.reports.push(
        CheckReport::new("scan-complete", missing.len(), 0, missing.is_empty()).param("missing_tau", &missing),
    );
    match fit_exponent(&rows) {
        Ok(f) => doc.summarize("fit", f),
        Err(e) => doc.summarize("fit_error", e.to_string()),
    }
    for r in rows {
        doc.row(r);
    }
    Ok(())
}

fn clt(d: &StepDistribution, cfg: &JobConfig, doc: &mut Document) -> Result<()> {
    let trunc = fixed_point_truncation(cfg, cfg.tau)?;
    let series = PiSeries::compute(d, cfg.tau, trunc.n_max, Some(trunc.order_max), &Budget::default())?;
    let p = match (cfg.p, cfg.tau) {
        (Some(p), _) => p,
        (None, Memory::Finite(1)) => 1.0,
        (None, _) => solve_pc_fixed_point(&series, trunc, cfg.tol)?.value,
    };
    let diffusion = effective_diffusion(d, p, &series, trunc)?;
    let rows = gaussian_collapse(d, p, &cfg.n_list, &cfg.k_list, &diffusion, Some(&series))?;
    let worst = rows.iter().filter(|r| !r.flagged).map(|r| r.deviation).fold(0.0, f64::max);
    doc.summarize("p", p);
    doc.summarize("v", diffusion.v);
    doc.summarize("sigma_j2", diffusion.sigma_j2);
    doc.summarize("max_unflagged_deviation", worst);
    for r in rows {
        doc.row(r);
    }
    Ok(())
}

fn constants(cfg: &JobConfig, doc: &mut Document) -> Result<()> {
    let spec = ContinuumKernelSpec::new("uniform-box", cfg.d)?;
    let n_terms = cfg.nmax.unwrap_or(30).max(2);
    let a = theorem_constant(cfg.d, cfg.l, spec.sigma_h2())?;
    let pred = pc_first_order_prediction(cfg.d, cfg.l, n_terms)?;
    let moments = continuum_moments(&spec, n_terms)?;
    doc.summarize("theorem_constant", a);
    doc.summarize("pc_first_order", pred);
    doc.summarize("sigma_h2", moments.sigma_h2);
    for r in moments.table {
        doc.row(r);
    }
    Ok(())
}
