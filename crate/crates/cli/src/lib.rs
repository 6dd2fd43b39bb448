//! Command-line front end for the `covsense` rates: sweeps, covert
//! information queries and Monte Carlo validation, written as CSV.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::Parser;

pub use commands::{run, Command};
pub use config::{ConfigError, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical error: {0}")]
    Numerical(#[from] covsense::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "covsense", version, about = "Covert photon-counting ranging: exponents and trade-offs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set mu_B=100`. Repeatable; wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Output path, `-` for stdout. Same as `--set path=...`.
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// Output format. Only csv.
    #[arg(long, global = true)]
    pub format: Option<String>,
}

impl Cli {
    /// Defaults, then the config file, then `--set`, then `--out`/`--format`.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
                key: path.display().to_string(),
                msg: e.to_string(),
            })?;
            cfg.apply_text(&text)?;
        }
        for kv in &self.overrides {
            cfg.set_override(kv)?;
        }
        if let Some(out) = &self.out {
            cfg.set("path", out)?;
        }
        if let Some(format) = &self.format {
            cfg.set("format", format)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs a command and renders its CSV.
pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<String, CliError> {
    let table = run(cmd, cfg)?;
    Ok(output::render_csv(cmd.name(), cfg, &table))
}
