use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation was called with arguments that break its preconditions
    /// (shape mismatch, out-of-range index, asymmetric input, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("non-finite value {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("initialization failed: {0}")]
    Init(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}:{line}: negative entry {value} at ({row}, {col})")]
    NegativeEntry {
        path: PathBuf,
        line: usize,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("{path}: shape mismatch: {msg}")]
    ShapeMismatch { path: PathBuf, msg: String },

    #[error("{path}: duplicate relation for type pair {h}-{l}")]
    DuplicatePair { path: PathBuf, h: usize, l: usize },

    #[error("invalid manifest {path}: {msg}")]
    Manifest { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
