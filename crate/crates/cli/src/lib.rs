//! Command implementations behind the `biofilm` binary.
//!
//! Exit codes: 0 success or affirmative verdict, 1 input error, 2 runtime
//! abort or unwritable output, 3 negative scientific verdict.

pub mod commands;
pub mod config;
pub mod csv_io;

use std::path::PathBuf;

use thiserror::Error;

pub use config::RunConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_ABORT: u8 = 2;
pub const EXIT_NEGATIVE: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error(transparent)]
    Model(#[from] biofilm_core::Error),

    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The simulation stopped; a diagnostic snapshot was written.
    #[error("{kind}: {source}")]
    Aborted {
        kind: &'static str,
        source: biofilm_core::Error,
        diagnostic: Option<PathBuf>,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input(_) | CliError::Model(_) => EXIT_INPUT,
            CliError::Io { .. } | CliError::Aborted { .. } => EXIT_ABORT,
        }
    }
}
