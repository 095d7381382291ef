use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: u64, column: u64, message: String },

    #[error("{invariant} violated: {message}")]
    Validation { invariant: String, message: String },

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] chaining_core::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "parse_error",
            CliError::Validation { .. } => "validation_error",
            CliError::Io { .. } => "io_error",
            CliError::Config(_) => "config_error",
            CliError::Core(_) => "core_error",
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> CliError {
        CliError::Io { path: path.to_path_buf(), message: err.to_string() }
    }

    pub(crate) fn validation(invariant: &str, message: impl Into<String>) -> CliError {
        CliError::Validation { invariant: invariant.into(), message: message.into() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
