use std::path::PathBuf;

/// Errors raised anywhere in the feature pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A hyperparameter or flag is outside its allowed range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The input data is malformed or inconsistent with the requested operation.
    #[error("invalid data: {0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A numerical quantity collapsed (zero variance, zero mean distance, ...).
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Data(_) | Error::Io { .. } => 2,
            Error::Degenerate(_) => 3,
        }
    }
}
