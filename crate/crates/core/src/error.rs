use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad parameter, inconsistent inputs, or an unknown format/model id.
    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("validation error at line {line}: {msg}")]
    Validation { line: usize, msg: String },

    /// A numeric input outside the domain of the operation (e.g. negative RCA).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("unsupported for {model} model: {msg}")]
    UnsupportedModel { model: String, msg: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's configuration rather than by
    /// runtime conditions. The CLI maps these to exit code 2.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::UnsupportedModel { .. } | Error::Domain(_)
        )
    }
}
