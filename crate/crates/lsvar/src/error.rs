//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by simulation, weighting, and estimation routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Every kernel weight evaluated to zero (compact-support kernel with a
    /// bandwidth smaller than the grid step).
    #[error("all kernel weights are zero at u = {u} (bandwidth h = {bandwidth})")]
    AllWeightsZero { u: f64, bandwidth: f64 },

    /// A Gram matrix was numerically singular: its reciprocal condition
    /// number fell below the crate-wide threshold.
    #[error("gram matrix numerically singular (rcond = {rcond:.3e})")]
    SingularGram { rcond: f64 },

    /// The slope-correction matrix S = Z0' D K D Z0 of the local-linear
    /// weighting could not be factored as positive definite.
    #[error("local-linear correction matrix is not positive definite")]
    SingularCorrection,

    /// Eigenvalue iteration did not converge within its iteration budget.
    #[error("eigenvalue computation failed to converge within {max_iter} iterations")]
    NoConvergence { max_iter: usize },

    /// A simulated path diverged; the model violates the stability condition.
    #[error("simulated value exceeded {limit:.1e} at t = {t}; model appears unstable")]
    UnstableModel { t: usize, limit: f64 },

    /// A model failed the spectral-radius stability check.
    #[error("model fails stability check: max spectral radius = {max_radius}")]
    StabilityCheckFailed { max_radius: f64 },

    /// An evaluation grid contained no points.
    #[error("evaluation grid is empty")]
    EmptyGrid,

    /// Requested error metrics on a summary that carries no truth values.
    #[error("replication summary has no truth values")]
    NoTruth,

    /// I - A(u) was numerically singular in long-run mean recovery.
    #[error("I - A(u) is numerically singular")]
    SingularIminusA,

    /// A caller-supplied argument violated a precondition.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// File reading or writing failed.
    #[error("io error: {0}")]
    Io(String),

    /// A CSV or table input could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
