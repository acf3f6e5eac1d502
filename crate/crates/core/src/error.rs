use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("non-finite value while evaluating {0}")]
    NonFinite(String),

    #[error("truncation tail {tail:e} exceeds tolerance {tol:e}")]
    Truncation { tail: f64, tol: f64 },

    #[error("quadrature did not converge: estimated error {err:e} above tolerance {tol:e}")]
    Convergence { err: f64, tol: f64 },

    #[error("square-root branch jump of {jump:.3} rad near lambda = {at:.4}")]
    Branch { jump: f64, at: f64 },

    #[error("phase undefined at the identity")]
    UndefinedPhase,

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("kernel degenerate: {0}")]
    KernelDegenerate(String),

    #[error("dyadic certificate failure at level {level}, cube {cube}: {reason}")]
    Certificate { level: usize, cube: String, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
