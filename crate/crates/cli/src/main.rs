//! `catsim`: runs scans, engine comparisons and fits from TOML configs.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 numerical
//! failure, 3 fit did not converge, 4 comparison gate exceeded.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use catsim_core::harness::ScanKind;
use clap::{Args, Parser, Subcommand};

use crate::config::{EngineName, Overrides, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "catsim", version, about = "Spin-dependent force simulator for a trapped-ion qubit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cat-state probability against force duration.
    Timescan(RunArgs),
    /// Cat-state probability against detuning.
    Freqscan(RunArgs),
    /// Echo interferometer fringes against the analysis phase.
    Phasescan(RunArgs),
    /// Closed form against the master-equation integrator on the scan grid.
    CompareOracle(RunArgs),
    /// Fits a model to scan data.
    Fit(FitArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Shots per point; 0 gives exact model probabilities.
    #[arg(long)]
    shots: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    engine: Option<EngineName>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    config: PathBuf,
    /// Scan data (CSV or JSON); overrides `fit.data`.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("CATSIM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("CATSIM_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let load = |a: &RunArgs| -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&a.config)?;
        cfg.apply(&Overrides { seed: a.seed, shots: a.shots, out: a.out.clone(), engine: a.engine });
        Ok(cfg)
    };
    match cli.command {
        Command::Timescan(a) => commands::cmd_scan(&load(&a)?, ScanKind::TimeScan),
        Command::Freqscan(a) => commands::cmd_scan(&load(&a)?, ScanKind::DetuningScan),
        Command::Phasescan(a) => commands::cmd_scan(&load(&a)?, ScanKind::PhaseScan),
        Command::CompareOracle(a) => commands::cmd_compare(&load(&a)?),
        Command::Fit(a) => {
            let mut cfg = RunConfig::load(&a.config)?;
            cfg.apply(&Overrides { out: a.out, ..Default::default() });
            commands::cmd_fit(&cfg, &a.config, a.data)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
