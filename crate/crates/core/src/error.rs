use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("column `{column}` has {count} usable values, need at least 2")]
    InsufficientData { column: String, count: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("{partition} partition yields no windows ({rows} rows)")]
    NoWindows { partition: &'static str, rows: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite gradient in `{0}`")]
    NonFiniteGradient(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("persistence baseline needs historical target `{0}` among the inputs; use the base feature set")]
    NoPersistence(String),

    #[error("all {0} trials diverged")]
    AllDiverged(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("invalid model file: {0}")]
    ModelFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
