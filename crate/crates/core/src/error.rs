use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong inside the workbench.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed binary file; `offset` is the byte position where decoding failed.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    /// A value or shape breaks a type invariant.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("index {index} out of range for axis {axis} with length {len}")]
    OutOfRange { axis: usize, index: usize, len: usize },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Training produced a non-finite objective.
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    /// Prediction or scoring failed for one case of a pool.
    #[error("case {id}: {source}")]
    Case {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn invariant(message: impl Into<String>) -> Self {
        Error::Invariant(message.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the numbers themselves rather than the inputs.
    pub fn is_runtime(&self) -> bool {
        match self {
            Error::Divergence { .. } => true,
            Error::Case { source, .. } => source.is_runtime(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
