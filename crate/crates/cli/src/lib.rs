//! Experiment runner: flat TOML configs in, JSON records or CSV tables out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

use thiserror::Error;
use wzlvq_netsim::NetsimError;

pub use config::ExperimentConfig;

/// Version of the output record layout.
pub const SCHEMA_VERSION: u32 = 1;

/// `git describe` of the build, or `unknown`.
pub fn build_stamp() -> String {
    format!("{}+{}", env!("CARGO_PKG_VERSION"), env!("WZLVQ_BUILD_STAMP"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("invariant failure: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<wzlvq::Error> for CliError {
    fn from(e: wzlvq::Error) -> Self {
        match e {
            wzlvq::Error::Uncertified(_) => CliError::Invariant(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<NetsimError> for CliError {
    fn from(e: NetsimError) -> Self {
        match e {
            NetsimError::InvalidConfig(m) => CliError::Validation(m),
            NetsimError::Invariant { .. } => CliError::Invariant(e.to_string()),
            NetsimError::Core(c) => c.into(),
        }
    }
}

/// Parse a config file and apply the `--seed` override.
pub fn load_config(path: &std::path::Path, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    Ok(cfg)
}
