//! Run settings: built-in defaults, overridden by a JSON config file, overridden
//! by command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use fbm_ldp::benchmarks;
use fbm_ldp::mc::DEFAULT_SEED;
use fbm_ldp::rate::VolFunction;
use fbm_ldp::Hurst;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LargeTimeKind {
    /// Plain CEV process, `S_t / t^q`.
    Cev,
    /// CEV under the clock `∫|B^H|^{2p}`.
    FractionalCev,
}

/// Every tunable, each optional so layers can be merged. Field names double as
/// the JSON config keys.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Hurst index in (0, 1).
    #[arg(long)]
    pub hurst: Option<f64>,
    /// Correlation between the price and volatility drivers.
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Volatility function, e.g. "tanh:0.1,0.05", "const:0.2", "abs:0.1,0.05".
    #[arg(long)]
    pub vol: Option<String>,
    /// Fourier modes in the variational ansatz.
    #[arg(long)]
    pub modes: Option<usize>,
    /// Nodes of the variational quadrature grid.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Monte Carlo paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Time steps per Monte Carlo path.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Maturity (or horizon for path dumps).
    #[arg(long)]
    pub maturity: Option<f64>,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Comma-separated log-moneyness grid.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub xs: Option<Vec<f64>>,
    /// Log-moneyness for the LDP check.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<f64>,
    /// Comma-separated maturities for the LDP check.
    #[arg(long, value_delimiter = ',')]
    pub ts: Option<Vec<f64>>,
    /// Refine the smile to second order at `--maturity`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub refine: Option<bool>,
    /// Large-time model.
    #[arg(long, value_enum)]
    pub kind: Option<LargeTimeKind>,
    /// CEV elasticity in (0, 1).
    #[arg(long)]
    pub beta: Option<f64>,
    /// CEV volatility level.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Power of the volatility clock `|y|^{2p}`.
    #[arg(long)]
    pub p: Option<f64>,
    /// Price scaling exponent for the plain CEV rate.
    #[arg(long)]
    pub q: Option<f64>,
    /// Upper end of the rate-curve grid.
    #[arg(long)]
    pub s_max: Option<f64>,
    /// Points on the rate-curve grid.
    #[arg(long)]
    pub points: Option<usize>,
    /// JSON config file; command-line flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! overlay {
    ($top:expr, $base:expr, $($field:ident),+ $(,)?) => {
        Settings { $($field: $top.$field.or($base.$field),)+ }
    };
}

impl Settings {
    /// Loads the config file named by `--config`, if any, under the flags.
    pub fn resolve(self) -> Result<Settings, CliError> {
        let file = match &self.config {
            Some(path) => read_config(path)?,
            None => Settings::default(),
        };
        Ok(overlay!(
            self, file, hurst, rho, vol, modes, grid, paths, steps, maturity, seed, out, format,
            threads, xs, x, ts, refine, kind, beta, sigma, p, q, s_max, points, config,
        ))
    }

    pub fn hurst(&self) -> Result<Hurst, CliError> {
        Ok(Hurst::new(self.hurst.unwrap_or(benchmarks::HURST))?)
    }

    pub fn rho(&self) -> f64 {
        self.rho.unwrap_or(0.0)
    }

    pub fn vol(&self) -> Result<VolFunction, CliError> {
        match &self.vol {
            Some(s) => Ok(s.parse()?),
            None => Ok(VolFunction::paper_tanh()),
        }
    }

    pub fn modes(&self) -> usize {
        self.modes.unwrap_or(benchmarks::N_MODES)
    }

    pub fn grid(&self) -> usize {
        self.grid.unwrap_or(200)
    }

    pub fn paths_or(&self, default: usize) -> usize {
        self.paths.unwrap_or(default)
    }

    pub fn steps(&self) -> usize {
        self.steps.unwrap_or(benchmarks::MC_STEPS)
    }

    pub fn maturity_or(&self, default: f64) -> f64 {
        self.maturity.unwrap_or(default)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or(Format::Csv)
    }

    pub fn xs(&self) -> Vec<f64> {
        self.xs
            .clone()
            .unwrap_or_else(|| benchmarks::UNCORRELATED.iter().map(|r| r.x).collect())
    }
}

fn read_config(path: &Path) -> Result<Settings, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
