use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the decoding library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller supplied a value outside the accepted domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation was invoked in a state its precondition forbids.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// A configuration file or option set could not be interpreted.
    #[error("configuration error: {0}")]
    Config(String),

    /// A binary file did not carry the expected magic header.
    #[error("{path}: not a {expected} file (bad magic header)")]
    BadMagic { path: PathBuf, expected: &'static str },

    /// A binary file was written by an incompatible format version.
    #[error("{path}: unsupported format version {found} (expected {expected})")]
    VersionMismatch {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    /// A binary file is truncated or internally inconsistent.
    #[error("{path}: corrupt file: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    /// Stored tensors do not fit the architecture they are loaded into.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse classification used by the CLI to choose an exit code.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) => ErrorKind::Config,
            Error::ContractViolation(_) | Error::ShapeMismatch(_) => ErrorKind::Contract,
            Error::BadMagic { .. }
            | Error::VersionMismatch { .. }
            | Error::Corrupt { .. }
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_) => ErrorKind::Io,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Io,
    Contract,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
