//! Experiment runner behind the `topocrit` binary.

pub mod config;
pub mod runner;

pub use config::{Config, Experiment};
pub use runner::{execute, run_experiment, Artifacts, Cell, FitReport, RunOutcome};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] topocrit::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const ERROR: i32 = 1;
    pub const FIT_FAILED: i32 = 2;
}
