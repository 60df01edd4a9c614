use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition of an operation was violated by the caller or the data.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The input file does not follow the expected layout.
    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    /// A non-finite value appeared during a forward pass or training.
    #[error("numeric failure in {location}: {message}")]
    Numeric { location: String, message: String },

    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn numeric(location: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Numeric {
            location: location.into(),
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for command-line front ends: 3 for numeric aborts,
    /// 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric { .. } => 3,
            _ => 2,
        }
    }
}
