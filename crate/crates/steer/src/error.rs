use std::io;

/// Errors raised by file formats, artifacts and the server.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Core(#[from] steer_core::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{what}: unsupported version {found:?} (expected {expected:?})")]
    Version {
        what: &'static str,
        found: String,
        expected: String,
    },
    #[error("skeleton fingerprint mismatch: file has {found:016x}, skeleton is {expected:016x}")]
    SkeletonMismatch { expected: u64, found: u64 },
    #[error("{what} truncated at byte offset {offset}: needed {needed} more bytes")]
    Truncated {
        what: &'static str,
        offset: usize,
        needed: usize,
    },
    #[error("{what}, line {line}: {message}")]
    Parse {
        what: &'static str,
        line: usize,
        message: String,
    },
    #[error("{what}: {message}")]
    Format { what: &'static str, message: String },
}

impl Error {
    /// Stable machine-readable identifier of the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Core(_) => "core",
            Error::Json(_) => "json",
            Error::Version { .. } => "version_mismatch",
            Error::SkeletonMismatch { .. } => "skeleton_mismatch",
            Error::Truncated { .. } => "truncated",
            Error::Parse { .. } => "parse",
            Error::Format { .. } => "format",
        }
    }

    pub(crate) fn format(what: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            what,
            message: message.into(),
        }
    }

    pub(crate) fn parse(what: &'static str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            what,
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
