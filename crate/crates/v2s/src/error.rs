use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("adapter command failed: {0}")]
    Adapter(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Training aborted because a loss term stopped being finite.
    #[error("non-finite value in '{term}' at step {step}")]
    NonFinite { term: String, step: u64 },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI contract: 1 for user errors,
    /// 2 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
