//! `vecsparch` command-line front end over the weights, simulation,
//! estimation and Monte-Carlo routines of the library.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 validation or
//! stability failure, 3 non-convergence (results are still written).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigFile, FitArgs, McArgs, SimulateArgs, WeightsArgs};

#[derive(Debug, Parser)]
#[command(name = "vecsparch", version, about = "Spatiotemporal log-ARCH simulation and estimation")]
struct Cli {
    /// TOML file with [weights], [simulate], [fit] or [mc] tables; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build or load a spatial weight matrix and validate it
    Weights(WeightsArgs),
    /// Simulate a panel, or the two illustration fields with --fig1
    Simulate(SimulateArgs),
    /// Fit a panel by quasi maximum likelihood
    Fit(FitArgs),
    /// Run a Monte-Carlo design
    Mc(McArgs),
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let out = cli.out.or(file.out).unwrap_or_else(|| PathBuf::from("."));
    match cli.command {
        Command::Weights(a) => commands::weights(a.merge(file.weights).resolved(), &out),
        Command::Simulate(a) => commands::simulate_cmd(a.merge(file.simulate).resolved(), &out),
        Command::Fit(a) => commands::fit_cmd(a.merge(file.fit).resolved(), &out),
        Command::Mc(a) => commands::mc_cmd(a.merge(file.mc).resolved(), &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
