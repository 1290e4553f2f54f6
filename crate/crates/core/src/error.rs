use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, IdkError>;

#[derive(Debug, Error)]
pub enum IdkError {
    /// A configuration or call argument violates a documented constraint.
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// Window bookkeeping does not line up with the requested update.
    #[error("state error: {0}")]
    State(String),

    /// Input data could not be parsed. `row` is 1-based over the file's
    /// records (header excluded), `column` is 0-based.
    #[error("ingestion error at row {row}, column {column}: {message}")]
    Ingestion {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("ingestion error: {0}")]
    Dataset(String),

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IdkError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        IdkError::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IdkError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors raised while reading or parsing input data.
    pub fn is_ingestion(&self) -> bool {
        matches!(
            self,
            IdkError::Ingestion { .. } | IdkError::Dataset(_) | IdkError::Io { .. }
        )
    }
}
