//! `sqzsim`: squeezed-vacuum source simulator.
//!
//! Subcommands compute model squeezing spectra, error-signal sweeps with
//! demodulation cross-checks, closed-loop lock runs, and loss/injection
//! budgets, writing CSV tables for external plotting. Exit codes: 0 on
//! success, 2 for configuration errors, 3 for simulation failures. Set
//! `SQZSIM_LOG=quiet|info|debug` to control stderr verbosity.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sqzsim::commands::{self, AppError};
use sqzsim::config::ScenarioConfig;
use sqzsim::log_debug;

#[derive(Parser)]
#[command(name = "sqzsim", version, about = "Squeezed-vacuum source simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the generated tables.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Squeezing/antisqueezing spectrum of the modeled source.
    Spectrum(CommonArgs),
    /// Servo error-signal sweeps plus demodulation pipeline cross-checks.
    ErrorSignals(CommonArgs),
    /// Closed-loop lock acquisition run.
    Lock {
        #[command(flatten)]
        common: CommonArgs,
        /// Overrides the seed in the scenario file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Efficiency chain and interferometer injection plan.
    Budget(CommonArgs),
}

fn load_config(path: &Option<PathBuf>) -> Result<ScenarioConfig, AppError> {
    match path {
        None => {
            log_debug("no --config given, using built-in defaults");
            Ok(ScenarioConfig::default())
        }
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| AppError::Config(format!("cannot read {}: {e}", p.display())))?;
            let cfg = ScenarioConfig::parse(&text).map_err(|e| AppError::Config(e.to_string()))?;
            log_debug(&format!(
                "effective scenario from {}:\n{}",
                p.display(),
                cfg.serialize()
            ));
            Ok(cfg)
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    match &cli.command {
        Command::Spectrum(common) => {
            let cfg = load_config(&common.config)?;
            commands::cmd_spectrum(&cfg, &common.out)?;
        }
        Command::ErrorSignals(common) => {
            let cfg = load_config(&common.config)?;
            commands::cmd_error_signals(&cfg, &common.out)?;
        }
        Command::Lock { common, seed } => {
            let cfg = load_config(&common.config)?;
            commands::cmd_lock(&cfg, *seed, &common.out)?;
        }
        Command::Budget(common) => {
            let cfg = load_config(&common.config)?;
            commands::cmd_budget(&cfg, &common.out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Config(msg)) => {
            eprintln!("sqzsim: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Simulation(msg)) => {
            eprintln!("sqzsim: {msg}");
            ExitCode::from(3)
        }
    }
}
