//! Library side of the `scalesfl` command: config loading and the
//! `train`, `attack`, `bench` and `verify-ledger` commands.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid config or usage,
//! 3 runtime invariant breach (including a failed ledger check).

pub mod artifacts;
pub mod bench;
pub mod config;
pub mod train;
pub mod verify;

use std::path::{Path, PathBuf};

use thiserror::Error;

use scalesfl_core::simnet::SimError;

pub use config::{ExperimentConfig, OutputFormat};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidSpec(m) => CliError::Config(format!("task: {m}")),
            other => CliError::Invariant(other.to_string()),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

/// A validated config plus the directory relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn output_dir(&self) -> &Path {
        &self.config.output_dir
    }

    pub fn seed(&self) -> u64 {
        self.config.task.seed
    }
}

/// Parses `path`, applies `overrides` and validates the result.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<LoadedConfig, CliError> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = overrides.seed {
        config.task.seed = seed;
    }
    if let Some(out) = &overrides.out {
        config.output_dir = out.clone();
    }
    if let Some(format) = overrides.format {
        config.format = format;
    }
    config.validate()?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, base_dir })
}
