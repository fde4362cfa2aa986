use thiserror::Error;

/// Errors produced by the walk, lace and expansion routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("mode mismatch: cannot combine exact and float fields")]
    ModeMismatch,

    #[error("step {index} has displacement {displacement} outside the support of D")]
    StepOutsideSupport { index: usize, displacement: String },

    #[error("enumeration budget exceeded: estimated {estimated_nodes:.3e} nodes, cap {cap:.3e}")]
    BudgetExceeded { estimated_nodes: f64, cap: f64 },

    #[error("memory budget exceeded at n = {n}: {cells} cells, cap {cap}")]
    MemoryBudget { n: usize, cells: u128, cap: u128 },

    #[error("transfer state explosion: estimated {estimated:.3e} states, cap {cap:.3e}")]
    StateExplosion { estimated: f64, cap: f64 },

    #[error("power iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("interval graph is not connected: gap at {gap}")]
    Disconnected { gap: u32 },

    #[error("walk has {walk} steps but the lace interval has length {lace}")]
    LengthMismatch { walk: usize, lace: usize },

    #[error("nonpositive denominator {0} (p beyond the truncated critical point)")]
    NonpositiveDenominator(f64),

    #[error("fixed-point iteration left [0.5, 2]: p = {0}")]
    Divergent(f64),

    #[error("series tail not summable: term ratio {0} >= 1")]
    TailNotConvergent(f64),

    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),

    #[error("missing expansion coefficient for m = {0}")]
    MissingPi(usize),

    #[error("exponent fit needs at least 3 positive differences, got {0}")]
    TooFewPoints(usize),

    #[error("exact weight accumulator overflowed")]
    Overflow,
}

pub type Result<T> = std::result::Result<T, Error>;
