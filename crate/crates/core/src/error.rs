use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum EdcnnError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },

    #[error("model format error: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EdcnnError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(EdcnnError::InvalidArgument(msg.into()))
}

impl EdcnnError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EdcnnError::Io {
            path: path.into(),
            source,
        }
    }
}
