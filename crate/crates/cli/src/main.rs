//! `cspi`: exact references, finite-step corrections, parameter sweeps and
//! validation checks driven by a TOML config.
//!
//! Exit status: 0 on success, 1 when a computation, bound or check fails,
//! 2 for configuration errors.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Run;
use crate::config::{Format, RunConfig, OUT_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error(transparent)]
    Run(#[from] cspi::Error),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "cspi",
    version,
    about = "Coherent-state path integral corrections and exact references"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to `[output].dir`, then $CSPI_OUT, then `.`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces `discretization.n_t` with a single odd value.
    #[arg(long = "n-t")]
    n_t: Option<usize>,
    /// Table format for staircase and sweep outputs.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact thermodynamics and the occupation staircase.
    Exact(Common),
    /// Finite-step correction reports, fluctuation blocks and an optional sweep.
    Correction(Common),
    /// Runs the registered invariant checks.
    Validate(Common),
    /// Correction and its parameter derivative over `[sweep].grid`.
    Sweep(Common),
}

fn prepare(common: &Common) -> Result<Run, CliError> {
    let (mut config, base) = match &common.config {
        Some(path) => {
            let base = path.parent().map(PathBuf::from).unwrap_or_default();
            (RunConfig::load(path)?, base)
        }
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    if let Some(n) = common.n_t {
        config.discretization.n_t = vec![n];
    }
    config.check()?;
    let out = common
        .out
        .clone()
        .or_else(|| config.output.dir.as_ref().map(|d| base.join(d)))
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let format = common.format.unwrap_or(config.output.format);
    Ok(Run {
        config,
        out,
        format,
        base,
    })
}

type Handler = fn(&Run) -> Result<(), CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, command): (&Common, Handler) = match &cli.command {
        Command::Exact(c) => (c, commands::exact),
        Command::Correction(c) => (c, commands::correction),
        Command::Validate(c) => (c, commands::validate),
        Command::Sweep(c) => (c, commands::sweep),
    };
    match prepare(common).and_then(|run| command(&run)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cspi: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
