use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("structure error at row {row}: {msg}")]
    Structure { row: usize, msg: String },

    #[error("invalid dataset: task {task_id}, row {row}: {msg}")]
    Invalid {
        task_id: String,
        row: usize,
        msg: String,
    },

    #[error("split error: {0}")]
    Split(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("basis solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("unknown task index {0}")]
    UnknownTask(usize),

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input (files, schemas, configs) rather
    /// than a numerical failure during computation.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::Schema(_)
            | Error::Parse { .. }
            | Error::Structure { .. }
            | Error::Invalid { .. }
            | Error::Split(_)
            | Error::Config(_)
            | Error::Parameter(_)
            | Error::Dimension(_)
            | Error::UnknownTask(_)
            | Error::Io { .. }
            | Error::Json { .. }
            | Error::Csv(_) => true,
            Error::AtIteration { source, .. } => source.is_usage(),
            Error::NoConvergence { .. } | Error::Singular(_) | Error::ZeroVariance(_) => false,
        }
    }
}
