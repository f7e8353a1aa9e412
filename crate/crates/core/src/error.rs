use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {error}")]
    Io { path: PathBuf, error: std::io::Error },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    Dimension {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{matrix} is not positive definite even with jitter {jitter:e}")]
    Factorization { matrix: &'static str, jitter: f64 },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("no trained localizer for building {building}, floor {floor}")]
    MissingLocalizer { building: u32, floor: u32 },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, error: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            error,
        }
    }
}
