use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the backtester.
///
/// The CLI maps these onto process exit codes through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient history: need {need} closes, have {have}")]
    InsufficientHistory { need: usize, have: usize },

    #[error("{0}")]
    InvalidInput(String),

    #[error("data error in {path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("provider error: {0}")]
    Provider(#[from] ProviderError),

    #[error("replay mismatch on field `{field}`: stored {stored}, recomputed {recomputed}")]
    ReplayMismatch {
        field: &'static str,
        stored: String,
        recomputed: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Data {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }

    /// 1 usage/config, 2 data, 3 provider.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Provider(_) => 3,
            _ => 2,
        }
    }
}

/// Failure reported by a chat, embedding or reranking backend.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProviderError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("bad response: {0}")]
    BadResponse(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("configuration: {0}")]
    Config(String),
}
