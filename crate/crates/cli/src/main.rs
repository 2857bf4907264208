//! `tankstab`: batch driver for spectra, controllability, feedback design and simulation.
//!
//! Exit codes: 0 success, 1 failed verdict (controllability, report),
//! 2 configuration error, 3 regime violation, 4 numerical failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "tankstab", version, about = "Spectral stabilization of the linearized water tank")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalue tables of the tank and target operators.
    Spectrum(Common),
    /// Moment table and controllability verdict.
    Controllability(Common),
    /// Feedback gain table.
    Feedback(Common),
    /// Closed-loop simulation from a seeded real initial state.
    Simulate(Common),
    /// Lyapunov certificate and feasibility threshold.
    Lyapunov(Common),
    /// Open-loop steering to a single-mode target.
    Steer(Common),
    /// Finite-dimensional backstepping on a seeded random pair.
    FiniteDemo(Common),
    /// Runs every acceptance check; exit 0 iff all pass.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set gamma=0.03`. Repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (same as `out_dir`).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, ConfigError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        for kv in &self.set {
            c.apply_override(kv)?;
        }
        if let Some(o) = &self.out {
            c.out_dir = o.display().to_string();
        }
        Ok(c)
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn io(message: String) -> Self {
        CliError { code: 1, message }
    }

    pub fn config(message: String) -> Self {
        CliError { code: 2, message }
    }

    pub fn regime(message: String) -> Self {
        CliError { code: 3, message }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::config(e.0)
    }
}

impl From<tankstab::Error> for CliError {
    fn from(e: tankstab::Error) -> Self {
        use tankstab::Error::*;
        let code = match &e {
            Domain(_) | Usage(_) | Config(_) => 2,
            Regime(_) | Uncontrollable { .. } => 3,
            Numerical(_) => 4,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::Spectrum(c) => ("spectrum", c),
        Command::Controllability(c) => ("controllability", c),
        Command::Feedback(c) => ("feedback", c),
        Command::Simulate(c) => ("simulate", c),
        Command::Lyapunov(c) => ("lyapunov", c),
        Command::Steer(c) => ("steer", c),
        Command::FiniteDemo(c) => ("finite-demo", c),
        Command::Report(c) => ("report", c),
    };
    let result = common
        .load()
        .map_err(CliError::from)
        .and_then(|cfg| commands::run(name, &cfg));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("tankstab {name}: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
