use thiserror::Error;

/// Errors produced by the transport-statistics library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("orbit escaped: |coordinate| exceeded {radius:e}")]
    Escaped { radius: f64 },

    #[error("no real fixed points for k = {k} (require k > -1)")]
    NoRealFixedPoints { k: f64 },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point is not in the region")]
    NotInRegion,

    #[error("entry set is empty")]
    EmptyEntrySet,

    #[error("invalid index {0}")]
    InvalidIndex(i64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unreliable estimate: censored fraction {fraction:.4} exceeds {limit}")]
    UnreliableEstimate { fraction: f64, limit: f64 },

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("arclength budget {budget} exhausted before the manifold reached the symmetry line")]
    BudgetExceeded { budget: f64 },

    #[error("no homoclinic point found: {0}")]
    NoHomoclinicFound(String),

    #[error("action sum did not converge within {terms} terms")]
    ActionNotConverged { terms: usize },

    #[error("fiber x = {x} lies outside the lobe interval ({lo}, {hi})")]
    OutsideLobe { x: f64, lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
