//! Command-line driver: estimation ensembles, lock comparisons, scaling
//! sweeps and Allan analysis of recorded lock traces.

pub mod commands;
pub mod config;
pub mod error;
pub mod table;

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use table::Format;

#[derive(Debug, Parser)]
#[command(name = "bfe", version, about = "Adaptive Bayesian frequency estimation runs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Monte Carlo trials (lock: runs per method); overrides `trials` in the config.
    #[arg(long, global = true, value_name = "N")]
    pub trials: Option<u64>,

    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the estimator on simulated measurements.
    Estimate,
    /// Closed-loop locking with PID and/or BFE, with Allan deviations.
    Lock,
    /// Precision versus cumulative time for one or more schemes.
    Scaling,
    /// Allan deviation and stability fits of recorded lock traces.
    Analyze {
        /// Lock trace CSV files (cycle, time_s, delta_nu_hz, correction_hz).
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

/// Runs one subcommand and returns the summary to print.
pub fn run(cli: &Cli) -> CliResult<String> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let trials = cli.trials.or(cfg.trials).unwrap_or(1);
    fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", cli.out.display())))?;
    let out = commands::Output {
        dir: cli.out.clone(),
        format: cli.format,
    };
    match &cli.command {
        Command::Estimate => commands::estimate(&cfg, seed, trials, &out),
        Command::Lock => commands::lock(&cfg, seed, trials, &out),
        Command::Scaling => commands::scaling(&cfg, seed, trials, &out),
        Command::Analyze { inputs } => commands::analyze(&cfg, inputs, &out),
    }
}
