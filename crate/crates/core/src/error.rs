use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum NgviError {
    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("wrong family: {0}")]
    WrongFamily(String),

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("no convergence after {evaluations} evaluations (gap {gap:e})")]
    NoConvergence { evaluations: usize, gap: f64 },

    #[error("model capability missing: {0}")]
    ModelCapabilityMissing(String),

    #[error("non-finite value: {0}")]
    NonFiniteValue(String),

    #[error("well-posedness violated: updated natural parameter left the interior of dom A ({0})")]
    WellPosednessViolated(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("misaligned traces: {0}")]
    MisalignedTraces(String),
}

impl NgviError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        NgviError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, NgviError>;
