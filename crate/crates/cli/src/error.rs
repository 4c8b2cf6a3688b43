use std::path::{Path, PathBuf};

/// Failures mapped onto the process exit codes: 2 for configuration and
/// usage problems, 3 for a missing upstream artifact, 4 for anything that
/// goes wrong while running.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing {what}: {} (produce it first)", path.display())]
    Missing { what: String, path: PathBuf },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Missing { .. } => 3,
            CliError::Runtime(_) => 4,
        }
    }

    pub fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub fn require(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Missing { what: what.to_string(), path: path.to_path_buf() })
    }
}
