use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MuntzError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error(
        "precision insufficient at {bits} bits: residual {residual:e} exceeds tolerance {tolerance:e}"
    )]
    PrecisionInsufficient {
        bits: u32,
        residual: f64,
        tolerance: f64,
    },

    #[error("matrix is not positive definite (pivot {0})")]
    NotPositiveDefinite(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("series did not converge: {0}")]
    Convergence(String),

    #[error("quadrature failed: error estimate {error:e} above tolerance {tolerance:e} (estimate {estimate})")]
    Quadrature {
        estimate: String,
        error: f64,
        tolerance: f64,
    },

    #[error("function is not in the closed span: {0}")]
    NonMember(String),

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("malformed data: {0}")]
    Format(String),
}

impl MuntzError {
    /// True when the failure comes from exhausted working precision rather
    /// than from the mathematics.
    pub fn is_precision(&self) -> bool {
        matches!(
            self,
            MuntzError::PrecisionInsufficient { .. } | MuntzError::NotPositiveDefinite(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, MuntzError>;
