use thiserror::Error;

/// Errors raised across the numerical modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("matrix is not Hermitian (asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("non-finite matrix entry")]
    NonFinite,

    #[error("eigensolver did not converge for eigenvalue {index} after {sweeps} sweeps")]
    EigenNoConvergence { index: usize, sweeps: usize },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("work count {count} exceeds the guard {limit}")]
    GuardExceeded { count: u128, limit: u128 },

    #[error("bin {bin} has vanishing probability {prob:e}")]
    VanishingProbability { bin: i64, prob: f64 },

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),

    #[error("optimizer made no progress within {0} attempts")]
    StepSizeFailure(usize),

    #[error("cost does not match the linear-quadratic template: {0}")]
    TemplateMismatch(String),

    #[error("all log-weights are -inf")]
    Underflow,
}

impl Error {
    /// Whether the error signals a numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenNoConvergence { .. }
                | Error::Quadrature(_)
                | Error::StepSizeFailure(_)
                | Error::Underflow
                | Error::VanishingProbability { .. }
                | Error::NonFinite
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
