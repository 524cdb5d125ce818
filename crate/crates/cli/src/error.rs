use std::path::Path;

use thiserror::Error;

/// Failure classes with stable exit codes.
#[derive(Debug, Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numeric(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Input(_) => 3,
            Failure::Numeric(_) => 4,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::Input(format!("{}: {e}", path.display()))
    }

    pub fn parse(path: &Path, msg: impl std::fmt::Display) -> Self {
        Failure::Input(format!("{}: {msg}", path.display()))
    }
}

impl From<mirkit::Error> for Failure {
    fn from(e: mirkit::Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

pub fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}
