//! Config-driven front end: parses run configs, dispatches to the engine
//! and writes CSV artifacts plus a manifest.

pub mod config;
pub mod run;

use fraclimit_core::FracError;

pub use config::{parse_config, Mode, RawConfig, RunConfig};
pub use run::{run, Outcome};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error{}: {msg}", line.map(|l| format!(" on line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },
    #[error(transparent)]
    Core(#[from] FracError),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn config(line: Option<usize>, msg: String) -> Self {
        CliError::Config { line, msg }
    }

    /// 2 for configuration, 3 for numerical failures, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Core(e) => e.exit_code(),
            CliError::Io(_) => 4,
        }
    }
}

/// Exit status of a completed run whose checks failed.
pub const CHECK_FAILED: i32 = 3;
