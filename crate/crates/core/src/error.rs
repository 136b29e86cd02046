use thiserror::Error;

/// Errors produced by the spin, dynamics, kernel, simulation and pipeline modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("index {index} out of range for size {size}")]
    Index { index: usize, size: usize },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("exhaustive enumeration refused for n = {n} (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("integrator failure at t = {t} ms: {reason}")]
    Integrator { t: f64, reason: String },

    #[error("bracket failure: {0}")]
    Bracket(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
