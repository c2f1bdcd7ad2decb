use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its allowed range or inconsistent with the model.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data is empty or unusable.
    #[error("data error: {0}")]
    Data(String),

    #[error("input encoding error at byte {offset}: {message}")]
    Encoding { offset: usize, message: String },

    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Skip-signal: the word contains characters outside the model alphabet.
    #[error("word {0:?} encodes to the unknown token")]
    UnknownWord(String),

    #[error("malformed {what} at line {line}: {message}")]
    Format {
        what: &'static str,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

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

    /// True for errors that exclude a single item from an analysis rather
    /// than abort it.
    pub fn is_skip(&self) -> bool {
        matches!(self, Error::UnknownWord(_))
    }

    /// Short machine-readable tag used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Data(_) => "data",
            Error::Encoding { .. } => "encoding",
            Error::InvalidSegmentation(_) => "invalid_segmentation",
            Error::Contract(_) => "contract",
            Error::UnknownWord(_) => "unknown_word",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
