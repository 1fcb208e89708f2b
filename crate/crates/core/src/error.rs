use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("universe is empty after ingestion")]
    EmptyUniverse,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("value out of range: {0}")]
    Range(String),

    #[error("training dataset is empty")]
    EmptyDataset,

    #[error("normal equations are singular (lambda = 0 with rank-deficient design)")]
    Singular,

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("need at least {needed} samples, got {got}")]
    SampleSize { needed: usize, got: usize },

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid privacy budget: {0}")]
    Budget(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
