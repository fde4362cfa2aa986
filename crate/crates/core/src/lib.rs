//! Memory-tau and self-avoiding walks on Z^d: exact enumeration, lace
//! combinatorics, lace-expansion coefficients and critical-point estimates.

pub mod asymptotics;
pub mod dist;
pub mod error;
pub mod expansion;
pub mod lace;
pub mod lattice;
pub mod pi;
pub mod report;
pub mod transfer;
pub mod walk;

pub use dist::StepDistribution;
pub use error::{Error, Result};
pub use lace::{Edge, IntervalGraph, Lace};
pub use lattice::{LatticeField, Mode, Site};
pub use pi::{PiSeries, PiTable};
pub use walk::{Budget, Memory, Walk};
