//! Command-line front end for the `pim-simo` simulator.

pub mod commands;
pub mod config;

use std::fmt;

pub use commands::{cmd_rate, cmd_required_snr, cmd_sweep, cmd_validate, RateArgs, RateReport};
pub use config::{Overrides, RunConfig};

/// Failures mapped onto process exit codes.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad configuration or arguments (exit 2).
    Config(String),
    /// A validation check failed (exit 1).
    Validation(String),
    /// I/O or other runtime failure (exit 1).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Validation(_) | CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<pim_simo::Error> for CliError {
    // every core error here stems from a configured value
    fn from(e: pim_simo::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
