use std::path::{Path, PathBuf};

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_COMPUTE: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Stored data that fails its integrity or consistency checks.
    #[error("{}: {reason}", path.display())]
    Data { path: PathBuf, reason: String },

    #[error(transparent)]
    Compute(#[from] relhartree::Error),

    #[error("{0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn data(path: &Path, reason: impl Into<String>) -> Self {
        CliError::Data {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_USAGE,
            CliError::Io { .. } | CliError::Data { .. } => EXIT_IO,
            CliError::Compute(_) => EXIT_COMPUTE,
            CliError::CheckFailed(_) => EXIT_CHECK_FAILED,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Data { .. } => "data",
            CliError::Compute(_) => "compute",
            CliError::CheckFailed(_) => "check",
        }
    }
}
