use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum HifError {
    #[error("invalid configuration: `{key}` {reason}")]
    Config { key: String, reason: String },

    #[error("failed to parse configuration {path}: {message}")]
    ConfigSyntax { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: truncated record at byte offset {offset}")]
    Truncated { path: PathBuf, offset: u64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("label count {labels} does not match point count {points}")]
    LabelMismatch { labels: usize, points: usize },

    #[error("scan index {got} is not after last integrated scan {last}")]
    OutOfOrderScan { got: u64, last: u64 },

    #[error("caller misuse: {0}")]
    Misuse(&'static str),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("invalid map file: {0}")]
    MapFormat(String),
}

impl HifError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HifError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(key: &str, reason: impl Into<String>) -> Self {
        HifError::Config {
            key: key.to_owned(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = HifError> = std::result::Result<T, E>;
