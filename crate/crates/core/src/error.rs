use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Ingestion,
    Validation,
    Computation,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("similarity undefined: {0}")]
    UndefinedSimilarity(String),

    #[error("text is empty after normalization")]
    EmptyText,

    #[error("image {width}x{height} is smaller than the {size}x{size} window")]
    Window { width: usize, height: usize, size: usize },

    #[error("power trace is empty")]
    EmptyTrace,

    #[error("malformed power trace: {0}")]
    MalformedTrace(String),

    #[error("noise sequence exhausted after {consumed} attempt(s) without meeting the threshold")]
    TruncatedSequence { consumed: usize },

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("precondition failed for candidate `{candidate}`: {reason}")]
    Precondition { candidate: String, reason: String },

    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } | Error::Parse { .. } => ErrorKind::Ingestion,
            Error::Invalid(_) | Error::Precondition { .. } | Error::EmptyText => {
                ErrorKind::Validation
            }
            Error::Dimension(_) | Error::Window { .. } => ErrorKind::Validation,
            Error::EmptyTrace | Error::MalformedTrace(_) => ErrorKind::Ingestion,
            Error::UndefinedSimilarity(_) | Error::TruncatedSequence { .. } => {
                ErrorKind::Computation
            }
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            reason: reason.to_string(),
        }
    }
}
