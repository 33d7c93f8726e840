//! Errors of the command-line layer and their exit codes.

use std::path::PathBuf;

use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] utilprice_core::Error),
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed JSON in {path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("CSV output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 infeasible or malformed input, 3 arbitrage, 4 non-convergence,
    /// 5 internal invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => e.exit_code(),
            CliError::Io { .. } | CliError::Json { .. } | CliError::Usage(_) => 2,
            CliError::Csv(_) => 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "io",
            CliError::Json { .. } => "malformed_json",
            CliError::Csv(_) => "csv",
            CliError::Usage(_) => "invalid_input",
        }
    }

    /// Machine-readable payload written to standard error.
    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() })
    }
}
