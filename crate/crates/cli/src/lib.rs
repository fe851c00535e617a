//! Command-line front end: `weight`, `prevalence`, `compare` and `simulate`,
//! each driven by a JSON config.

pub mod compare;
pub mod config;
pub mod demo;
pub mod error;
pub mod prevalence;
pub mod simulate;
pub mod weight;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::CliError;

/// Environment variable holding the log filter, e.g. `info` or `debug`.
pub const LOG_ENV: &str = "SURVEYFORGE_LOG";

#[derive(Debug, Parser)]
#[command(name = "surveyforge", version, about = "Survey weighting, prevalence estimation and design simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the seed of every simulated scenario.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Base, calibrated and nonresponse-adjusted weights with diagnostics.
    Weight(CommonArgs),
    /// Original, unweighted and weighted prevalence per city and outcome.
    Prevalence(CommonArgs),
    /// Diff and VarRatio per cell, with figure panel files.
    Compare(CommonArgs),
    /// Monte Carlo scenarios; fails when an assertion fails.
    Simulate(CommonArgs),
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Weight(a) => {
            no_seed(&a, "weight");
            weight::run(&a.config, &a.out)
        }
        Command::Prevalence(a) => {
            no_seed(&a, "prevalence");
            prevalence::run(&a.config, &a.out)
        }
        Command::Compare(a) => {
            no_seed(&a, "compare");
            compare::run(&a.config, &a.out)
        }
        Command::Simulate(a) => simulate::run(&a.config, &a.out, a.seed),
    }
}

fn no_seed(a: &CommonArgs, cmd: &str) {
    if a.seed.is_some() {
        log::info!("`{cmd}` is deterministic; --seed has no effect");
    }
}
