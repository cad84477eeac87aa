//! Experiment runner for the freshness model and simulator.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("staleness audit failed: {violations} read(s) served data older than the bound")]
    Audit { violations: usize },
}

impl CliError {
    /// 0 success, 1 usage/config, 2 runtime, 3 staleness audit.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Audit { .. } => 3,
        }
    }
}
