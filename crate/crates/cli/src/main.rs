//! Batch front-end: closed-form asymptotics, rate tables, log-Laplace tables
//! and the verification suite, as JSON or CSV.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use smallball_cli::commands::{cmd_asym, cmd_laplace, cmd_table, CommandOutput};
use smallball_cli::config::{Format, RunConfig};
use smallball_cli::output;
use smallball_cli::presets::Preset;
use smallball_cli::verify::cmd_verify;

/// Exit status when every record is in order.
const EXIT_OK: u8 = 0;
/// Exit status for configuration, numerical or I/O failures.
const EXIT_ERROR: u8 = 1;
/// Exit status when output was written but some records are flagged.
const EXIT_FLAGGED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "smallball",
    version,
    about = "Small-ball asymptotics of integrated Sobolev norms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form small-ball asymptotic for every problem and index.
    Asym(Common),
    /// Rates and log powers of the solution and noise over an index grid.
    Table(Common),
    /// Verification checks against independent oracles.
    Verify(Common),
    /// Decomposed log-Laplace transform over a grid of p.
    Laplace(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run description.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Seed of the Monte Carlo streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated check names for `verify`.
    #[arg(long, value_delimiter = ',')]
    checks: Option<Vec<String>>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::empty(),
        };
        if self.preset.is_some() {
            config.preset = self.preset;
        }
        if self.out.is_some() {
            config.out = self.out.clone();
        }
        if self.format.is_some() {
            config.format = self.format;
        }
        if self.seed.is_some() {
            config.seed = self.seed;
        }
        if self.checks.is_some() {
            config.checks = self.checks.clone();
        }
        Ok(config.resolved())
    }
}

fn run(cli: Cli) -> Result<bool> {
    let (common, command): (&Common, fn(&RunConfig) -> Result<CommandOutput>) = match &cli.command {
        Command::Asym(c) => (c, cmd_asym),
        Command::Table(c) => (c, cmd_table),
        Command::Verify(c) => (c, cmd_verify),
        Command::Laplace(c) => (c, cmd_laplace),
    };
    let config = common.config()?;
    let output = command(&config)?;
    output::emit(&output.bytes, config.out.as_deref())?;
    Ok(output.flagged)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(false) => ExitCode::from(EXIT_OK),
        Ok(true) => ExitCode::from(EXIT_FLAGGED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
