//! Experiment driver for the `sequiv` library.
//!
//! Everything here is plumbing around the numerics: a TOML experiment
//! config, sub-experiment runners, comparison metrics between kernel
//! matrices, CSV emitters, and a deterministic JSON report. The binary
//! in `main.rs` is a thin subcommand layer over [`runner::run`].

pub mod config;
pub mod csvio;
pub mod metrics;
pub mod report;
pub mod runner;

use thiserror::Error;

/// Failure categories, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, unparseable, or invalid configuration. Exit code 2.
    #[error("config: {0}")]
    Config(String),
    /// A numerical routine reported a failure. Exit code 3.
    #[error("numeric: {0}")]
    Numeric(String),
    /// Filesystem trouble while writing or reading artifacts. Exit code 4.
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numeric(_) => "numeric",
            CliError::Io(_) => "io",
        }
    }

    /// Exit code for a stored category label; unknown labels fall back
    /// to the numeric code.
    pub fn exit_code_for_category(category: &str) -> i32 {
        match category {
            "config" => 2,
            "io" => 4,
            _ => 3,
        }
    }
}

impl From<sequiv::Error> for CliError {
    fn from(e: sequiv::Error) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
