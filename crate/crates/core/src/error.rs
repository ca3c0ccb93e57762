use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("record {id}: inconsistent labels task1={task1} task2={task2}")]
    InconsistentLabels {
        id: String,
        task1: String,
        task2: String,
    },

    #[error("duplicate tweet id `{0}`")]
    DuplicateId(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("language `{0}` is not supported by the toxicity-scoring API")]
    UnsupportedLanguage(String),

    #[error("HTTP request failed with status {status} after {attempts} attempt(s)")]
    Http { status: u16, attempts: u32 },

    #[error("network error: {0}")]
    Network(String),

    #[error("response missing attribute {0}")]
    MissingAttribute(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for failures talking to the scoring service.
    pub fn is_network(&self) -> bool {
        matches!(self, Error::Http { .. } | Error::Network(_))
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
