use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::RecordId;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by dataset loading, embedding, cleaning, training, and
/// evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
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

    #[error("{path}:{line}: feature dimension {found} does not match dataset dimension {expected}")]
    FileDimension {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("duplicate record_id {0}")]
    DuplicateRecord(RecordId),

    #[error("no records in {0}")]
    NoRecords(PathBuf),

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("zero variance: all samples identical, no principal directions exist")]
    ZeroVariance,

    #[error("degenerate embedding for record {record}: vector collapsed before normalization")]
    DegenerateEmbedding { record: RecordId },

    #[error("training collapsed at iteration {iteration}: {source}")]
    TrainingCollapse {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(
        "no threshold reaches precision {target}: best achievable is {best_precision} at T={best_threshold}"
    )]
    CalibrationFailed {
        target: f64,
        best_precision: f64,
        best_threshold: f64,
    },

    #[error("requested {requested} {kind} pairs but only {available} distinct pairs exist")]
    InsufficientPairs {
        kind: &'static str,
        requested: usize,
        available: usize,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
