//! Library backing the `quenchfit` binary: experiment configuration,
//! command implementations and the file formats they emit. The binary is a
//! thin argument-parsing shell so that tests drive the same code paths.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Core(#[from] quenchfit_core::CoreError),

    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    /// Machine-readable tag for the error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Core(_) => "core",
            CliError::Runtime(_) => "runtime",
        }
    }
}
