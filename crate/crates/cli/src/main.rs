//! `fbm-ldp`: asymptotic smiles, Monte Carlo checks and large-time rates for
//! rough fractional stochastic volatility models.

mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::config::Settings;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl From<fbm_ldp::Error> for CliError {
    fn from(e: fbm_ldp::Error) -> Self {
        use fbm_ldp::Error as E;
        match e {
            E::InvalidParameter { .. } | E::LengthMismatch { .. } | E::VolDescriptor(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Numerical(_) => ExitCode::from(1),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "fbm-ldp",
    version,
    about = "Large-deviation asymptotics for rough volatility models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Leading-order implied-volatility smile from the variational rate.
    Smile(Settings),
    /// Monte Carlo implied vols at strikes exp(x t^{1/2-H}).
    Mc(Settings),
    /// Compare -t^{2H} log P(X_t > x t^{1/2-H}) with the rate over maturities.
    LdpCheck(Settings),
    /// Large-time rate curves for the CEV and fractional CEV models.
    Largetime(Settings),
    /// Dump sampled fBM paths.
    SimulateFbm(Settings),
    /// Ritz and Monte Carlo columns of both reference tables.
    ReproduceTables(Settings),
}

type Job = fn(&Settings) -> Result<String, CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (settings, job): (Settings, Job) = match cli.command {
        Command::Smile(s) => (s, commands::smile),
        Command::Mc(s) => (s, commands::mc),
        Command::LdpCheck(s) => (s, commands::ldp_check),
        Command::Largetime(s) => (s, commands::largetime),
        Command::SimulateFbm(s) => (s, commands::simulate_fbm),
        Command::ReproduceTables(s) => (s, commands::reproduce_tables),
    };
    let settings = settings.resolve()?;
    if let Some(n) = settings.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let text = job(&settings)?;
    match &settings.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Numerical(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Numerical(format!("stdout: {e}"))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fbm-ldp: {e}");
            e.exit_code()
        }
    }
}
