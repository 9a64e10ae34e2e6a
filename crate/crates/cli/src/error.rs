use std::path::PathBuf;

use gauge_cspi_core::{ConfigError, EstimatorError, OracleError, RunError};
use gauge_cspi_core::market::MarketError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config line {line}: {reason}")]
    ConfigSyntax { line: usize, reason: String },
    /// Rejected parameter values.
    #[error("{0}")]
    Config(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("{path}: row {row}: {reason}")]
    Parse { path: PathBuf, row: usize, reason: String },
    #[error("{0}: no data rows")]
    EmptyFile(PathBuf),
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Market(#[from] MarketError),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl CliError {
    pub fn config(reason: impl std::fmt::Display) -> Self {
        CliError::Config(format!("invalid configuration: {reason}"))
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}
