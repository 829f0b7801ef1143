use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dice parse error at token `{token}`: {reason}")]
    DiceParse { token: String, reason: String },

    #[error("value {value} outside domain {domain}")]
    Domain { value: i64, domain: String },

    #[error("ingestion error at {location}: {reason}")]
    Ingest { location: String, reason: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("training diverged at epoch {epoch} (lr = {lr}): {reason}")]
    Diverged { epoch: usize, lr: f64, reason: String },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("leakage detected: {0}")]
    Leakage(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn empty(msg: impl Into<String>) -> Self {
        Error::EmptyInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than configuration or models.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::DiceParse { .. }
                | Error::Domain { .. }
                | Error::Ingest { .. }
                | Error::DuplicateId(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::Io { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
