use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Numeric(#[from] trigfree::Error),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}, column '{column}': {message}")]
    Parse { line: u64, column: String, message: String },
    #[error("{failed} of {total} replicates did not converge")]
    NonConvergence { failed: usize, total: usize },
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    /// Process exit status: 2 usage, 3 numeric domain, 4 non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Parse { .. } => 2,
            CliError::Numeric(trigfree::Error::Unsupported(_)) => 2,
            CliError::Numeric(_) => 3,
            CliError::NonConvergence { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
