use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A data row failed validation. `row` is 1-based and counts data rows only.
    #[error("row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: String,
        reason: String,
    },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),

    #[error("corrupt reference cache {path}: {reason}")]
    CorruptCache { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn param(
        name: &'static str,
        value: impl ToString,
        reason: impl Into<String>,
    ) -> Self {
        Error::InvalidParameter {
            name,
            value: value.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
