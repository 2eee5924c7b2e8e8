//! Experiment runner behind the `cas-srfe` binary: configuration files,
//! seeded trials of the adaptive and i.i.d. arms, and result files.

pub mod config;
pub mod diag;
pub mod experiment;
pub mod output;
pub mod seeds;

pub use config::{ConfigError, ExperimentConfig, ResolvedConfig};
pub use experiment::{resolve_jobs, run_experiment, Arm, ExperimentOutput, ExperimentResult, RunError};
pub use output::emit_results;

/// Exit status for a bad configuration.
pub const EXIT_CONFIG: i32 = 1;
/// Exit status for a failed run.
pub const EXIT_RUN: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("run failed: {0}")]
    Run(#[from] RunError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Run(_) => EXIT_RUN,
        }
    }
}
