//! Command-line front end: `simulate` runs measurement ensembles, `analyze`
//! runs the spectral and asymptotic studies. Each run writes CSV tables, gnuplot
//! scripts and a manifest.json into one output directory.

pub mod analyze;
pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod simulate;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{load_config, Analysis, Params};
use error::CliResult;

#[derive(Parser, Debug)]
#[command(name = "qmonitor", version, about = "Quantum systems under repeated projective measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample measurement trajectories and write heat statistics
    Simulate(RunArgs),
    /// Spectral, relaxation and limit studies
    Analyze {
        /// Analysis to run; defaults to the `analysis` list of the config file
        #[arg(value_enum)]
        kind: Option<Analysis>,
        #[command(flatten)]
        args: RunArgs,
    },
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// TOML or JSON file with experiment parameters; flags take precedence
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub params: Params,
}

/// Preset defaults, then the config file, then flags.
pub fn resolve(args: &RunArgs) -> CliResult<Params> {
    let file = match &args.config {
        Some(path) => load_config(path)?,
        None => Params::default(),
    };
    let preset = args.params.preset.or(file.preset);
    let defaults = preset.map(|p| p.params()).unwrap_or_default();
    Ok(defaults.overlay(file).overlay(args.params.clone()))
}

/// Runs a parsed command and returns the manifest path.
pub fn run(cli: &Cli) -> CliResult<PathBuf> {
    match &cli.command {
        Command::Simulate(args) => simulate::simulate(&resolve(args)?),
        Command::Analyze { kind, args } => analyze::analyze(*kind, &resolve(args)?),
    }
}

pub(crate) fn output_root(p: &Params, fallback: &str) -> PathBuf {
    p.output.clone().unwrap_or_else(|| {
        let name = p.name.clone().or_else(|| p.preset.map(|x| x.name().to_string())).unwrap_or_else(|| fallback.into());
        PathBuf::from("qmonitor-out").join(name)
    })
}
