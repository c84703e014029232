use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failure classes of the command-line driver. Each maps to a fixed exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{origin}{}: {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    Parse {
        origin: String,
        line: Option<usize>,
        message: String,
    },

    #[error("invalid `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("solver failed: {0}")]
    Solver(#[from] abreu_core::Error),

    #[error("{failed} audit(s) failed")]
    Audit { failed: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Input { path: PathBuf, message: String },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn input(path: &Path, message: impl Into<String>) -> Self {
        CliError::Input {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    /// `2` configuration, `3` solver, `4` audit failure, `1` anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } => 2,
            CliError::Solver(_) => 3,
            CliError::Audit { .. } => 4,
            CliError::Io { .. } | CliError::Input { .. } => 1,
        }
    }
}
