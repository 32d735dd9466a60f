use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the stereo and avoidance pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("cannot encode {path}: {reason}")]
    Encode { path: PathBuf, reason: String },

    #[error("out of range: {0}")]
    Range(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("unsupported mode: {0}")]
    Unsupported(String),

    #[error("rectification needs source row {source_row} for output pixel ({x}, {y}) but the line buffer holds rows {lo}..={hi}")]
    BufferDepth {
        x: usize,
        y: usize,
        source_row: usize,
        lo: usize,
        hi: usize,
    },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn decode(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Decode {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn encode(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Encode {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
