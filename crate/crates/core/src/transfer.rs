//! Connective constant `mu_tau` as the Perron root of the window transfer
//! matrix.
//!
//! A state holds the last `tau - 1` positions relative to the current one,
//! most recent first. Appending a step is allowed when the new point avoids
//! every stored position.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::dist::StepDistribution;
use crate::error::{Error, Result};
use crate::walk::Memory;

const DEAD: i16 = i16::MIN;

#[derive(Clone, Copy, Debug)]
pub struct TransferOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Lump states into orbits of the signed coordinate permutations.
    pub symmetry_reduction: bool,
    /// Forget positions the walk can no longer reach within the window.
    pub prune_unreachable: bool,
    pub max_states: f64,
    pub max_transitions: f64,
}

impl Default for TransferOptions {
    fn default() -> Self {
        TransferOptions {
            tol: 1e-12,
            max_iterations: 100_000,
            symmetry_reduction: false,
            prune_unreachable: true,
            max_states: 5e6,
            max_transitions: 1e8,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TransferResult {
    pub mu: f64,
    pub iterations: usize,
    pub states: usize,
    pub transitions: usize,
    /// Collatz-Wielandt bounds `min_i (Av)_i / v_i <= mu <= max_i (Av)_i / v_i`.
    pub lower: f64,
    pub upper: f64,
}

impl TransferResult {
    pub fn pc(&self) -> f64 {
        1.0 / self.mu
    }
}

/// Estimated number of states before any allocation.
pub fn estimate_states(d: &StepDistribution, tau: u32, symmetry: bool) -> f64 {
    let m = d.support_size() as f64;
    let raw = if tau <= 1 { 1.0 } else { m * (m - 1.0).powi(tau as i32 - 2) };
    if symmetry {
        let dim = d.dim() as i32;
        let group = 2f64.powi(dim) * (1..=dim).map(|i| i as f64).product::<f64>();
        (raw / group).max(1.0)
    } else {
        raw
    }
}

struct Space<'a> {
    dim: usize,
    width: usize,
    tau: usize,
    range: i32,
    d: &'a StepDistribution,
    opts: TransferOptions,
}

impl Space<'_> {
    fn row<'s>(&self, state: &'s [i16], i: usize) -> Option<&'s [i16]> {
        let r = &state[i * self.dim..(i + 1) * self.dim];
        (r[0] != DEAD).then_some(r)
    }

    fn successor(&self, state: &[i16], step: &[i32]) -> Option<Vec<i16>> {
        for i in 0..self.width {
            if let Some(r) = self.row(state, i) {
                if r.iter().zip(step).all(|(&a, &b)| a as i32 == b) {
                    return None;
                }
            }
        }
        let mut next = vec![DEAD; self.width * self.dim];
        for c in 0..self.dim {
            next[c] = -step[c] as i16;
        }
        for i in 1..self.width {
            if let Some(r) = self.row(state, i - 1) {
                for c in 0..self.dim {
                    next[i * self.dim + c] = r[c] - step[c] as i16;
                }
            }
        }
        if self.opts.prune_unreachable {
            // the point i+1 steps back can meet one of the next tau-i-1 points
            for i in 0..self.width {
                let limit = (self.tau - i - 1) as i32 * self.range;
                let row = &mut next[i * self.dim..(i + 1) * self.dim];
                if row[0] != DEAD && row.iter().any(|&x| (x as i32).abs() > limit) {
                    row.fill(DEAD);
                }
            }
        }
        if self.opts.symmetry_reduction {
            self.canonicalize(&mut next);
        }
        Some(next)
    }

    fn canonicalize(&self, state: &mut [i16]) {
        let (dim, width) = (self.dim, self.width);
        let mut cols: Vec<Vec<i16>> = (0..dim)
            .map(|c| (0..width).map(|i| state[i * dim + c]).collect())
            .collect();
        for col in cols.iter_mut() {
            if let Some(&first) = col.iter().find(|&&x| x != DEAD && x != 0) {
                if first < 0 {
                    for x in col.iter_mut().filter(|x| **x != DEAD) {
                        *x = -*x;
                    }
                }
            }
        }
        cols.sort();
        for (c, col) in cols.iter().enumerate() {
            for (i, &x) in col.iter().enumerate() {
                state[i * dim + c] = x;
            }
        }
    }
}

struct Csr {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<f64>,
}

impl Csr {
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().with_min_len(1024).for_each(|(i, o)| {
            let range = self.offsets[i]..self.offsets[i + 1];
            *o = self.targets[range.clone()]
                .iter()
                .zip(&self.weights[range])
                .map(|(&j, &w)| w * v[j as usize])
                .sum();
        });
    }
}

/// Perron root of the memory-tau window transfer matrix, `tau >= 2`.
pub fn transfer_matrix_mu(d: &StepDistribution, tau: Memory, opts: TransferOptions) -> Result<TransferResult> {
    let tau = match tau {
        Memory::Finite(t) if t >= 2 => t,
        other => {
            return Err(Error::InvalidArgument(format!(
                "transfer matrix needs a finite tau >= 2, got {other}"
            )))
        }
    };
    if opts.tol <= 0.0 || opts.max_iterations == 0 {
        return Err(Error::InvalidArgument("tolerance and iteration cap must be positive".into()));
    }
    let estimate = estimate_states(d, tau, opts.symmetry_reduction);
    if estimate > opts.max_states {
        return Err(Error::StateExplosion {
            estimated: estimate,
            cap: opts.max_states,
        });
    }
    let range = d.range();
    if (tau as i64) * range as i64 >= i16::MAX as i64 {
        return Err(Error::Overflow);
    }
    let space = Space {
        dim: d.dim(),
        width: tau as usize - 1,
        tau: tau as usize,
        range,
        d,
        opts,
    };
    let steps: Vec<Vec<i32>> = space.d.steps().iter().map(|s| s.coords().to_vec()).collect();
    let weights = space.d.masses_f64();

    // a straight walk fills the first window
    let first: Vec<i32> = steps[0].clone();
    let mut start = vec![DEAD; space.width * space.dim];
    for _ in 0..space.width {
        start = space
            .successor(&start, &first)
            .expect("straight walks are self-avoiding");
    }

    let mut index: HashMap<Vec<i16>, u32> = HashMap::new();
    let mut states: Vec<Vec<i16>> = vec![start.clone()];
    index.insert(start, 0);
    let mut offsets = vec![0usize];
    let mut targets: Vec<u32> = Vec::new();
    let mut tw: Vec<f64> = Vec::new();
    let mut row: Vec<(u32, f64)> = Vec::new();
    let mut k = 0;
    while k < states.len() {
        row.clear();
        for (step, &w) in steps.iter().zip(weights) {
            if let Some(next) = space.successor(&states[k], step) {
                let id = match index.get(&next) {
                    Some(&id) => id,
                    None => {
                        let id = states.len() as u32;
                        if states.len() as f64 >= opts.max_states {
                            return Err(Error::StateExplosion {
                                estimated: states.len() as f64,
                                cap: opts.max_states,
                            });
                        }
                        index.insert(next.clone(), id);
                        states.push(next);
                        id
                    }
                };
                row.push((id, w));
            }
        }
        row.sort_by_key(|&(id, _)| id);
        let mut i = 0;
        while i < row.len() {
            let id = row[i].0;
            let mut w = 0.0;
            while i < row.len() && row[i].0 == id {
                w += row[i].1;
                i += 1;
            }
            targets.push(id);
            tw.push(w);
        }
        offsets.push(targets.len());
        if targets.len() as f64 > opts.max_transitions {
            return Err(Error::StateExplosion {
                estimated: targets.len() as f64,
                cap: opts.max_transitions,
            });
        }
        k += 1;
    }
    drop(index);
    let csr = Csr {
        offsets,
        targets,
        weights: tw,
    };
    let n = states.len();
    drop(states);
    power_iterate(&csr, n, opts).map(|(mu, iterations, lower, upper)| TransferResult {
        mu,
        iterations,
        states: n,
        transitions: csr.targets.len(),
        lower,
        upper,
    })
}

fn power_iterate(a: &Csr, n: usize, opts: TransferOptions) -> Result<(f64, usize, f64, f64)> {
    let mut v = vec![1.0 / n as f64; n];
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    let mut shift = 0.0;
    let mut steady = 0;
    let switch_at = (opts.max_iterations / 10).max(100);
    for it in 1..=opts.max_iterations {
        a.apply(&v, &mut w);
        if shift != 0.0 {
            for (x, y) in w.iter_mut().zip(&v) {
                *x += shift * y;
            }
        }
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Ok((0.0, it, 0.0, 0.0));
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (x, y) in w.iter().zip(&v) {
            if *y > 0.0 {
                let ratio = x / y;
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
        }
        let next = total - shift;
        let change = (next - lambda).abs();
        lambda = next;
        for (x, y) in v.iter_mut().zip(&w) {
            *x = y / total;
        }
        let (lo, hi) = (lo - shift, hi - shift);
        if hi - lo <= opts.tol * lambda.abs() {
            return Ok((lambda, it, lo, hi));
        }
        if change <= opts.tol * lambda.abs() {
            steady += 1;
            if steady >= 20 {
                return Ok((lambda, it, lo, hi));
            }
        } else {
            steady = 0;
        }
        if it == switch_at && shift == 0.0 {
            // periodic chains oscillate; A + sI has the same Perron vector
            shift = lambda.max(1e-3);
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
    })
}
