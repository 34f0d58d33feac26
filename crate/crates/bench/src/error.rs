use std::path::PathBuf;

use cadam_core::CoreError;
use thiserror::Error;

/// Why a return-matrix file was rejected.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("{path}: file has no data rows")]
    EmptyFile { path: PathBuf },
    #[error("{path}: row {row} has {found} cells, expected {expected}")]
    MalformedRow {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}: row {row}, column {column}: {cell:?} is not a finite number")]
    NonNumericCell {
        path: PathBuf,
        row: usize,
        column: usize,
        cell: String,
    },
    #[error("{path}: {message}")]
    Unreadable { path: PathBuf, message: String },
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("numeric failure: non-finite iterate at t = {t} ({context})")]
    Numeric { t: usize, context: String },
    #[error("{0}")]
    Core(CoreError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

impl From<CoreError> for BenchError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NonFinite { t } => BenchError::Numeric {
                t,
                context: "solver iterate".into(),
            },
            CoreError::InvalidConfig(m) | CoreError::InvalidParams(m) | CoreError::HypothesisViolation(m) => {
                BenchError::Config(m)
            }
            other => BenchError::Core(other),
        }
    }
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for bad input data, 4 for
    /// non-finite iterates, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Data(_) => 3,
            BenchError::Core(CoreError::InvalidData(_)) => 3,
            BenchError::Core(CoreError::DimensionMismatch { .. }) => 2,
            BenchError::Core(CoreError::Unavailable(_)) => 2,
            BenchError::Numeric { .. } => 4,
            BenchError::Core(_) | BenchError::Io { .. } => 1,
        }
    }
}
