use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Invalid input data. `context` names the offending sample when known.
    #[error("invalid data{}: {message}", context.as_ref().map(|c| format!(" in sample `{c}`")).unwrap_or_default())]
    InvalidData {
        context: Option<String>,
        message: String,
    },

    #[error("invalid distance matrix: {0}")]
    DistanceMatrix(String),

    #[error("invalid graph request: {0}")]
    Graph(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unknown parameter key {0}")]
    UnknownKey(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("training diverged for member {member} at epoch {epoch} (loss = {loss})")]
    Diverged {
        member: String,
        epoch: usize,
        loss: f64,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn data(context: Option<&str>, message: impl Into<String>) -> Self {
        Error::InvalidData {
            context: context.map(str::to_owned),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Numerical(_) | Error::Diverged { .. } => 3,
            _ => 2,
        }
    }
}
