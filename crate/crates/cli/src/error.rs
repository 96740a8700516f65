use std::path::Path;

use sle_core::SleError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),

    #[error(transparent)]
    Solver(#[from] SleError),
}

impl CliError {
    /// Process exit code for this failure category.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 3,
            CliError::Config(_) => 4,
            CliError::Io(_) => 5,
            CliError::Solver(SleError::CflViolation { .. }) => 7,
            CliError::Solver(_) => 6,
        }
    }

    pub fn in_file(self, path: &Path) -> Self {
        match self {
            CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
