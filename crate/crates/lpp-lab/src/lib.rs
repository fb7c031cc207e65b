//! Simulation laboratory for directed last passage percolation (LPP) on Z^2
//! with i.i.d. Exp(1) vertex weights.
//!
//! The model: each lattice vertex v carries a weight xi_v ~ Exp(1). For
//! u <= v (coordinatewise) the last passage time T(u,v) is the maximum of
//! path weights over up/right lattice paths from u to v, where a path's
//! weight sums the weights of all its vertices *except the last*. Excluding
//! the last vertex makes concatenation exactly additive,
//! T(u,w) + T(w,v) = T(u,v) whenever w lies on the optimal path, which the
//! constrained DP and the membership tests rely on.
//!
//! Modules:
//! - [`lattice`]: points, partial order, anti-diagonal segments,
//!   parallelogram regions, and the seeded weight field.
//! - [`passage`]: exact DP passage times, geodesic backtrace, the
//!   stage-constrained best path, and a brute-force enumeration oracle.
//! - [`geometry`]: observables on geodesics (transversal fluctuations,
//!   disjoint families, coalescence classes, grid encodings).
//! - [`experiments`]: seeded Monte Carlo estimators for each statistic.
//! - [`stats`]: exponent fits with bootstrap intervals, tail-rate fits, and
//!   Kolmogorov-Smirnov distance against a shipped Tracy-Widom table.

pub mod experiments;
pub mod geometry;
pub mod lattice;
pub mod passage;
pub mod stats;

/// Crate-wide error type.
///
/// `Capacity` guards memory/compute budgets, `Config` rejects invalid
/// experiment parameters, `Contract` flags violated operation preconditions.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("capacity exceeded: {what} needs {needed}, budget {budget}")]
    Capacity {
        what: &'static str,
        needed: u64,
        budget: u64,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
