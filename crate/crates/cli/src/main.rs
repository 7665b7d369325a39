//! `scl`: solve the obstacle game, verify the control problem built on it,
//! and export plot data.
//!
//! Exit codes: 0 all checks pass, 1 a criterion failed, 2 invalid input.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use config::RunConfig;
use scl_core::simulate::Outcome;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "scl", version, about = "Obstacle game solver and singular control verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Solve with the terminal envelope of `g`.
    #[arg(long, global = true)]
    general_terminal: bool,
    /// Print the effective configuration as JSON and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    /// Override the Monte Carlo seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the game and write V, boundaries and residuals.
    Solve { config: PathBuf },
    /// Run the full verification and write a report.
    Verify { config: PathBuf },
    /// Write gnuplot tables from a previous solve.
    Plotdata { config: PathBuf },
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = match &cli.command {
        Command::Solve { config } | Command::Verify { config } | Command::Plotdata { config } => config,
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut cfg = RunConfig::from_json(&text)?;
    if cli.general_terminal {
        cfg.problem.general_terminal = true;
    }
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli)?;
    if cli.dump_config {
        println!("{}", cfg.to_json());
        return Ok(());
    }
    match cli.command {
        Command::Solve { .. } => {
            for p in commands::solve(&cfg)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Verify { .. } => {
            let (path, report) = commands::verify(&cfg)?;
            println!("wrote {}", path.display());
            for c in &report.checks {
                println!("{:<12} {}", c.outcome.label(), c.name);
            }
            println!("result: {}", report.outcome().label());
            if let Some(c) = report.first_failure() {
                return Err(CliError::Failed(format!("criterion failed: {}: {}", c.name, c.detail)));
            }
            debug_assert_ne!(report.outcome(), Outcome::Fail);
        }
        Command::Plotdata { .. } => {
            for p in commands::plotdata(&cfg)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("scl: {e}");
            ExitCode::from(e.code())
        }
    }
}
