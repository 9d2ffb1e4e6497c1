//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by ingestion, solving, training, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// A file or line could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Data violated a documented invariant (range, length, ordering).
    #[error("validation error: {0}")]
    Validation(String),

    /// A file's shape disagrees with its declared schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A configuration value is unusable.
    #[error("config error: {0}")]
    Config(String),

    /// The requested budget target cannot be met by any allocation.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A numeric procedure failed to converge or left its domain.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The instance is too large for exhaustive enumeration.
    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
