use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use twostrain_cli::commands::{self, RunContext};
use twostrain_cli::config::RunConfig;
use twostrain_cli::error::CliError;
use twostrain_cli::output::OutputDir;

/// Two-strain epidemic model: simulation, steady states, phase plane,
/// parameter scans and fitting.
#[derive(Debug, Parser)]
#[command(name = "twostrain", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the full or reduced model and write the trajectory.
    Simulate(CommonArgs),
    /// Report steady states, reproduction numbers and the region.
    Analyze(CommonArgs),
    /// Write nullclines, the reduced vector field and the switching line.
    Phase(CommonArgs),
    /// Classify or evaluate a two-parameter grid.
    Scan(CommonArgs),
    /// Fit the model to daily cases split by variant share.
    Fit(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory receiving the output files.
    #[arg(long)]
    out: PathBuf,
    /// Random seed, overriding the one in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Omit the generation timestamp so identical runs give identical files.
    #[arg(long)]
    reproducible: bool,
}

type Action = fn(&RunConfig, &RunContext) -> Result<Vec<PathBuf>, CliError>;

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let (args, action): (CommonArgs, Action) = match cli.command {
        Command::Simulate(a) => (a, commands::simulate),
        Command::Analyze(a) => (a, commands::analyze),
        Command::Phase(a) => (a, commands::phase),
        Command::Scan(a) => (a, commands::scan),
        Command::Fit(a) => (a, commands::fit_command),
    };
    let config = RunConfig::load(&args.config)?;
    let ctx = RunContext { out: OutputDir::create(&args.out, args.reproducible)?, seed: args.seed };
    action(&config, &ctx)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for path in paths {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
