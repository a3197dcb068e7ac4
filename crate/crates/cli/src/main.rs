//! `spinbath`: NV-centre / ¹³C bath simulations from the command line.

mod commands;
mod config;
mod error;
mod output;
mod svg;
mod system;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Globals;

#[derive(Debug, Parser)]
#[command(name = "spinbath", version, about = "NV-centre spin and 13C bath simulations")]
struct Cli {
    /// RNG seed [default: 1]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps [default: all cores]
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory [default: $SPINBATH_OUT_DIR, else .]
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// TOML config file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// ESR transitions and broadened spectrum of an NV register
    Spectrum(commands::spectrum::SpectrumArgs),
    /// Inhomogeneous linewidth versus 13C concentration
    Linewidth(commands::linewidth::LinewidthArgs),
    /// Fit decay curves, the T2 = C/n law, or the Bell-state rate rules
    Fit(commands::fit::FitArgs),
    /// Lattice sites, random baths, second-moment sum, bath FID
    Bath(commands::bath::BathArgs),
    /// Pulse-sequence simulation on the eigenbasis register
    Pulse(commands::pulse::PulseArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let globals = Globals { seed: cli.seed, threads: cli.threads, out_dir: cli.out_dir, config: cli.config };
    let result = match &cli.command {
        Command::Spectrum(a) => commands::spectrum::run(a, &globals),
        Command::Linewidth(a) => commands::linewidth::run(a, &globals),
        Command::Fit(a) => commands::fit::run(a, &globals),
        Command::Bath(a) => commands::bath::run(a, &globals),
        Command::Pulse(a) => commands::pulse::run(a, &globals),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
