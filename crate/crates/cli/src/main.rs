//! `pairsim`: file-driven front end for the photon-pair engine.
//!
//! Every subcommand reads a flat `key = value` configuration, writes CSV
//! traces plus a run manifest into the output directory, and exits with
//! 0 on success, 1 on a configuration problem, 2 on a numeric failure
//! (non-convergence, undersampling, unstable normalization), 3 on I/O.

// NaN-rejecting guards use negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(std::io::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        CliError::Numeric(msg.into())
    }
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<pairsim_core::io::IoError> for CliError {
    fn from(e: pairsim_core::io::IoError) -> Self {
        match e {
            pairsim_core::io::IoError::Io(io) => CliError::Io(io),
            other => CliError::config(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "pairsim",
    version,
    about = "Simulation and trace analysis for below-threshold cavity photon-pair sources"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Path to the `key = value` configuration file.
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory (default: $PAIRSIM_OUT_DIR or the working directory).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl RunArgs {
    fn out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os("PAIRSIM_OUT_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Single-arm emission spectra versus frequency offset.
    Spectrum(RunArgs),
    /// CW pair flux versus frequency mismatch.
    FluxCw(RunArgs),
    /// Time-dependent flux under a pump pulse, one column per mismatch.
    FluxPulsed(RunArgs),
    /// Signal-idler cross-correlation versus delay.
    Xcorr(RunArgs),
    /// Single-arm autocorrelation versus delay.
    Acorr(RunArgs),
    /// Intracavity pump energy under a drive pulse, per detuning.
    PumpResponse(RunArgs),
    /// Cross-picture consistency checks of the input-output solution.
    LangevinCheck(RunArgs),
    /// Synthesize a pump-frequency sweep (counts + reflection).
    Sweep(RunArgs),
    /// Fit a trace with a Lorentzian or double-exponential model.
    Fit(RunArgs),
    /// Sample pair events and bin their coincidence histogram.
    Events(RunArgs),
    /// Estimate the frequency mismatch from a sweep CSV.
    Mismatch(RunArgs),
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Spectrum(a) => commands::spectrum(&a.out_dir(), &a.config),
        Command::FluxCw(a) => commands::flux_cw(&a.out_dir(), &a.config),
        Command::FluxPulsed(a) => commands::flux_pulsed(&a.out_dir(), &a.config),
        Command::Xcorr(a) => commands::xcorr(&a.out_dir(), &a.config),
        Command::Acorr(a) => commands::acorr(&a.out_dir(), &a.config),
        Command::PumpResponse(a) => commands::pump_response(&a.out_dir(), &a.config),
        Command::LangevinCheck(a) => commands::langevin_check(&a.out_dir(), &a.config),
        Command::Sweep(a) => commands::sweep(&a.out_dir(), &a.config),
        Command::Fit(a) => commands::fit(&a.out_dir(), &a.config),
        Command::Events(a) => commands::events(&a.out_dir(), &a.config),
        Command::Mismatch(a) => commands::mismatch(&a.out_dir(), &a.config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pairsim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
