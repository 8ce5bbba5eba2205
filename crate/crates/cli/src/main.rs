use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

/// Bohmian trajectories, critical points and chaos diagnostics for the 2-D harmonic oscillator.
#[derive(Debug, Parser)]
#[command(name = "bohmflow", version)]
struct Cli {
    /// Run configuration (`key = value` lines, or any output file with a provenance block).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one configuration key; applied after the file, in order.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// Seed for random initial-condition sampling (`ensemble.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Integrate one trajectory with its deviation vector.
    Simulate,
    /// List N, X and Y points at `analysis.t_critical`.
    CriticalPoints,
    /// Detect events and vortices along one trajectory.
    Events,
    /// Finite-time LCN series and classification of one trajectory.
    Lcn,
    /// Integrate a grid of initial conditions.
    Ensemble,
    /// One ensemble per value of `ensemble.c2_list`.
    Sweep,
    /// Occupancy colorplot of one trajectory.
    Colorplot,
    /// Periodicity diagnostics for commensurable frequencies.
    PeriodicityCheck,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(&cli) {
        Ok(status) => ExitCode::from(status),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
