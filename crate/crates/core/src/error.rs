use std::path::{Path, PathBuf};
use thiserror::Error;

/// Crate-wide error type. Variants map one-to-one onto process exit codes so
/// the CLI can report failures uniformly.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's preconditions (bad shapes, labels out
    /// of range, incompatible geometries, malformed configuration).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A computation produced NaN/Inf or otherwise left the numeric domain.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A binary artifact failed to parse; `offset` is the byte position at
    /// which the problem was detected.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    /// Exit code contract: 0 success, 2 contract, 3 numeric, 4 I/O or format.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Contract(_) => 2,
            Error::Numeric(_) => 3,
            Error::Format { .. } | Error::Io { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
