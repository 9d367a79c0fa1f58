//! Command implementations behind the `irstrack` binary.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};

pub mod commands;
pub mod config;
pub mod output;

pub use config::RunConfig;

/// Exit code of a run that finished but hit its iteration cap.
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(irstrack::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// 2 for configuration and validation problems, 4 for I/O, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Validation(_) => 2,
            CliError::Core(irstrack::Error::Validation(_) | irstrack::Error::Parse { .. }) => 2,
            CliError::Io { .. } => 4,
            CliError::Core(_) => 1,
        }
    }
}

impl From<irstrack::Error> for CliError {
    fn from(e: irstrack::Error) -> Self {
        match e {
            irstrack::Error::Validation(m) => CliError::Validation(m),
            other => CliError::Core(other),
        }
    }
}
