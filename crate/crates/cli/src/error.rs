use crate::config::Origin;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{origin}: key '{key}': {message}")]
    Config { origin: Origin, key: String, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("branch {branch}: {source}")]
    Branch { branch: String, source: tonguetrace::Error },
    #[error(transparent)]
    Core(#[from] tonguetrace::Error),
    #[error("{failed} verification row(s) failed")]
    VerifyFailed { failed: usize },
}

impl CliError {
    pub fn config(origin: Origin, key: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            origin,
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
