use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported target: {0}")]
    UnsupportedTarget(String),

    #[error("divergent norm: s = {s} is outside the admissible range s < {limit}")]
    DivergentNorm { s: f64, limit: f64 },

    #[error("spectral measure has no sampling mass")]
    EmptyMeasure,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("range of inner function [{lo}, {hi}] is not contained in outer domain [{domain_lo}, {domain_hi}]")]
    RangeViolation {
        lo: f64,
        hi: f64,
        domain_lo: f64,
        domain_hi: f64,
    },

    #[error("domain mismatch: [{0}, {1}] vs [{2}, {3}]")]
    DomainMismatch(f64, f64, f64, f64),

    #[error(
        "width budget {budget} exceeded on all {attempts} attempts \
         (narrowest candidate: width {best_width}, error {best_error})"
    )]
    BudgetExceeded {
        budget: usize,
        attempts: usize,
        best_width: usize,
        best_error: f64,
    },

    #[error("quadrature accuracy: {0}")]
    Quadrature(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported network file version {0} (expected 1)")]
    UnsupportedVersion(u64),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
