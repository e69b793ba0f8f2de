use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter record violates its invariants.
    #[error("configuration error: {0}")]
    Config(String),

    /// A sample value the codec cannot accept (NaN, infinity).
    #[error("input error: {0}")]
    Input(String),

    /// An operation was called outside its documented preconditions.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("demodulation failed: {0}")]
    Demodulation(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the root cause is a configuration problem rather than a
    /// failure while processing data.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Parse { .. } => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
