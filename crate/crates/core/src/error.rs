use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Variants are grouped by how a caller should react: malformed input
/// (`Parse`, `Schema`, `Validation`), bad parameters (`Config`), failed
/// evaluation preconditions (`Evaluation`) and filesystem trouble (`Io`,
/// `Image`).
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error("schema error in {location}: {message}")]
    Schema { location: String, message: String },

    #[error("validation error in {location}: {message}")]
    Validation { location: String, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {message}")]
    Image { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn validation(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the filesystem rather than by content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Image { .. })
    }
}
