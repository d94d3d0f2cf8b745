//! Published reference smiles for the tanh model `σ(y) = 0.1 + 0.05 tanh(y)`
//! with `H = 0.25`, four Fourier modes and maturity `0.005`.

/// One row of a reference table, vols in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkRow {
    pub x: f64,
    /// Leading-order smile from the variational rate.
    pub ritz: f64,
    /// Monte Carlo implied vol at [`MATURITY`].
    pub mc: f64,
}

const fn row(x: f64, ritz: f64, mc: f64) -> BenchmarkRow {
    BenchmarkRow { x, ritz, mc }
}

pub const HURST: f64 = 0.25;
pub const N_MODES: usize = 4;
pub const MATURITY: f64 = 0.005;
pub const MC_PATHS: usize = 500_000;
pub const MC_STEPS: usize = 100;

pub const RHO_UNCORRELATED: f64 = 0.0;
pub const UNCORRELATED: [BenchmarkRow; 6] = [
    row(0.001, 10.0000, 10.0179),
    row(0.02, 10.0183, 10.0364),
    row(0.04, 10.0716, 10.0832),
    row(0.06, 10.1551, 10.1594),
    row(0.08, 10.2625, 10.2589),
    row(0.10, 10.3866, 10.3778),
];

pub const RHO_CORRELATED: f64 = -0.1;
pub const CORRELATED: [BenchmarkRow; 8] = [
    row(-0.06, 10.3064, 10.3127),
    row(-0.04, 10.1769, 10.1674),
    row(-0.02, 10.0724, 10.0774),
    row(0.001, 9.99731, 10.0067),
    row(0.02, 9.96412, 9.97780),
    row(0.04, 9.96607, 9.97724),
    row(0.06, 10.0036, 10.0115),
    row(0.08, 10.0714, 10.0740),
];

/// Tolerance on the Ritz column, in vol points.
pub const RITZ_TOLERANCE: f64 = 0.03;

/// The reference table for a correlation, if one exists.
pub fn table(rho: f64) -> Option<&'static [BenchmarkRow]> {
    if rho == RHO_UNCORRELATED {
        Some(&UNCORRELATED)
    } else if rho == RHO_CORRELATED {
        Some(&CORRELATED)
    } else {
        None
    }
}
