use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("quadrature did not reach tolerance {tolerance:e} (error estimate {estimate:e}, {intervals} intervals)")]
    Quadrature {
        tolerance: f64,
        estimate: f64,
        intervals: usize,
    },

    #[error("density underflow: {0}")]
    ZeroDensity(String),

    #[error("finite-difference step too small: {0}")]
    StepTooSmall(String),

    #[error("tabulation failure: {0}")]
    Tabulation(String),

    #[error("no convergence after {iterations} iterations (marginal error {marginal_error:e})")]
    NonConvergence {
        iterations: usize,
        marginal_error: f64,
    },

    #[error("experiment failure: {0}")]
    Experiment(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Whether the error comes from input validation rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::DimensionMismatch { .. } | Error::InvalidPath(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
