use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] elastoslab::Error),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error("missing or incomplete run: {}", .0.display())]
    MissingRun(PathBuf),
}

pub type CliResult<T> = std::result::Result<T, CliError>;
