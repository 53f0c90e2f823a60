use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

/// Errors raised by the index pipeline.
#[derive(Debug, Error)]
pub enum HciError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("line {line}: {message}")]
    Line { line: u64, message: String },

    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),

    #[error("no valid rows in snapshot ({rejected} rejected)")]
    EmptySnapshot { rejected: usize },

    #[error("rejection rate {rate:.4} exceeds ceiling {ceiling:.4} ({rejected} of {total} rows)")]
    RejectionCeiling {
        rate: f64,
        ceiling: f64,
        rejected: usize,
        total: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("model schema version mismatch: file has {found}, this build reads {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("{0}")]
    Invalid(String),
}

impl HciError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HciError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = HciError> = std::result::Result<T, E>;
