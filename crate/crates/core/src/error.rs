use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice specification: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver did not converge (realization {realization:?}, eigenvalue {eigenvalue})")]
    EigenNoConvergence {
        realization: Option<u64>,
        eigenvalue: usize,
    },

    #[error("degenerate spectrum: eigenvalue gap {gap:e} below {tolerance:e}")]
    DegenerateSpectrum { gap: f64, tolerance: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("quadrature did not converge at t = {t}: achieved {achieved:e}, wanted {wanted:e}")]
    QuadratureNoConvergence { t: f64, achieved: f64, wanted: f64 },

    #[error("integrator failed at t = {t}: {reason} (error estimate {error_estimate:e})")]
    Integration {
        t: f64,
        reason: String,
        error_estimate: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("edge population {population:e} exceeds monitor threshold {threshold:e}")]
    BoundaryReached { population: f64, threshold: f64 },

    #[error("ensemble aborted: {failures} of {attempted} realizations failed (first: {first})")]
    EnsembleAborted {
        failures: usize,
        attempted: usize,
        first: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
