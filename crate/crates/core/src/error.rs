use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the engine and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The grid cannot witness the requested construction; never a wrong answer.
    #[error("resolution insufficient: {0}")]
    ResolutionInsufficient(String),

    #[error("ambiguous torus lift: {0}")]
    AmbiguousLift(String),

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn resolution(msg: impl Into<String>) -> Self {
        Error::ResolutionInsufficient(msg.into())
    }
}
