//! Crate-wide error type.

use std::fmt;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// I/O failure with the path that triggered it.
    Io { path: PathBuf, source: std::io::Error },
    /// A file-format problem at a specific line (1-based).
    Parse { path: PathBuf, line: usize, message: String },
    /// Invalid argument, precondition violation, or shape mismatch.
    Invalid(String),
    /// Training produced a non-finite loss.
    NonFiniteLoss { epoch: usize, batch: usize },
    /// The label schema of a model and a dataset disagree.
    SchemaMismatch { expected: Vec<String>, found: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, message: message.into() }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Io { path, source } => write!(f, "{}: {}", path.display(), source),
            Error::Parse { path, line, message } => {
                write!(f, "{}:{}: {}", path.display(), line, message)
            }
            Error::Invalid(message) => write!(f, "{message}"),
            Error::NonFiniteLoss { epoch, batch } => {
                write!(f, "non-finite loss at epoch {epoch}, batch {batch}")
            }
            Error::SchemaMismatch { expected, found } => {
                write!(f, "schema mismatch: model classes [{}], data has {}", expected.join(", "), found)
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
