//! Command-line drivers for `warpam`: configuration, WAV and result files, and the
//! experiments behind each subcommand.

pub mod commands;
pub mod config;
pub mod experiments;
pub mod output;
pub mod wav;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("bad input: {0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] warpam_core::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("WAV error: {0}")]
    Wav(#[from] hound::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const FAILURE: i32 = 2;
    /// Finished, but the estimation did not converge or some frames failed.
    pub const WARNINGS: i32 = 3;
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => exit::USAGE,
            _ => exit::FAILURE,
        }
    }
}
