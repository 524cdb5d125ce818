use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: not a RIFF/WAVE file", .0.display())]
    NotRiff(PathBuf),
    #[error("unsupported audio encoding: {0}")]
    UnsupportedCodec(String),
    #[error("malformed wav data: {0}")]
    MalformedWav(String),
    #[error("invalid audio buffer: {0}")]
    InvalidBuffer(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("label {0:?} is not in the vocabulary")]
    UnknownLabel(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    /// True for errors caused by unreadable or malformed input documents
    /// (as opposed to numeric preconditions that failed).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::NotRiff(_)
                | Error::UnsupportedCodec(_)
                | Error::MalformedWav(_)
                | Error::Schema { .. }
                | Error::Json(_)
                | Error::Parse { .. }
                | Error::UnknownLabel(_)
        )
    }
}
