use std::io;
use std::path::{Path, PathBuf};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    /// Malformed input; `line` is 1-based, 0 when the position is not line-oriented.
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] kernreg_core::Error),
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        Error::Io { path: path.as_ref().to_path_buf(), source }
    }

    pub fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, message: message.into() }
    }

    /// Short machine-readable category used by the command-line front end.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Unsupported(_) => "unsupported",
            Error::Config(_) => "config",
            Error::Core(kernreg_core::Error::SchemaMismatch { .. }) => "schema_mismatch",
            Error::Core(kernreg_core::Error::NoOverlap { .. }) => "no_overlap",
            Error::Core(kernreg_core::Error::InvalidCloud(_)) => "invalid_cloud",
            Error::Core(kernreg_core::Error::EmptyReport(_)) => "empty_report",
            Error::Core(kernreg_core::Error::InvalidArgument(_)) => "invalid_argument",
        }
    }
}
