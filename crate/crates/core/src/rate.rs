//! Small-time rate functions by Ritz minimization over a truncated Fourier
//! basis for `ḣ`, and the one-sided infimum `Λ*` used for option asymptotics.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::{apply_rkhs_operator, Hurst, KernelGrid};
use crate::optim::{brent_minimize, nelder_mead, SimplexOptions};
use crate::quadrature::trapezoid;

/// Volatility as a function of the fBM factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VolFunction {
    /// `σ(y) = c0 + c1 tanh(y)`
    Tanh { c0: f64, c1: f64 },
    /// `σ(y) = sigma`
    Const { sigma: f64 },
    /// `σ(y) = c0 + c1 |y|`
    Abs { c0: f64, c1: f64 },
}

impl VolFunction {
    /// The test model of the tables, `0.1 + 0.05 tanh(y)`.
    pub fn paper_tanh() -> Self {
        VolFunction::Tanh { c0: 0.1, c1: 0.05 }
    }

    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            VolFunction::Tanh { c0, c1 } => c0 + c1 * y.tanh(),
            VolFunction::Const { sigma } => sigma,
            VolFunction::Abs { c0, c1 } => c0 + c1 * y.abs(),
        }
    }

    /// Hölder exponent of `σ`.
    pub fn holder_exponent(&self) -> f64 {
        1.0
    }

    /// `sup σ` when finite.
    pub fn upper_bound(&self) -> Option<f64> {
        match *self {
            VolFunction::Tanh { c0, c1 } => Some(c0 + c1.abs()),
            VolFunction::Const { sigma } => Some(sigma),
            VolFunction::Abs { c0, c1: 0.0 } => Some(c0),
            VolFunction::Abs { .. } => None,
        }
    }

    /// `inf σ`.
    pub fn lower_bound(&self) -> f64 {
        match *self {
            VolFunction::Tanh { c0, c1 } => c0 - c1.abs(),
            VolFunction::Const { sigma } => sigma,
            VolFunction::Abs { c0, c1 } => {
                if c1 >= 0.0 {
                    c0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = match *self {
            VolFunction::Tanh { c0, c1 } | VolFunction::Abs { c0, c1 } => {
                c0.is_finite() && c1.is_finite()
            }
            VolFunction::Const { sigma } => sigma.is_finite(),
        };
        if !finite || self.lower_bound() <= 0.0 {
            return Err(Error::invalid(
                "vol",
                format!("{self} is not strictly positive"),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for VolFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VolFunction::Tanh { c0, c1 } => write!(f, "tanh:{c0},{c1}"),
            VolFunction::Const { sigma } => write!(f, "const:{sigma}"),
            VolFunction::Abs { c0, c1 } => write!(f, "abs:{c0},{c1}"),
        }
    }
}

impl FromStr for VolFunction {
    type Err = Error;

    /// Parses `tanh:c0,c1`, `const:sigma` or `abs:c0,c1`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::VolDescriptor(s.to_string());
        let (kind, params) = s.split_once(':').ok_or_else(bad)?;
        let values = params
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let vol = match (kind.trim(), values.as_slice()) {
            ("tanh", &[c0, c1]) => VolFunction::Tanh { c0, c1 },
            ("const", &[sigma]) => VolFunction::Const { sigma },
            ("abs", &[c0, c1]) => VolFunction::Abs { c0, c1 },
            _ => return Err(bad()),
        };
        vol.validate()?;
        Ok(vol)
    }
}

/// `ḣ(s) = a0 + Σ_n [a_n cos(2πns) + b_n sin(2πns)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierCoefficients {
    pub a0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl FourierCoefficients {
    pub fn zeros(n_modes: usize) -> Self {
        Self {
            a0: 0.0,
            a: vec![0.0; n_modes],
            b: vec![0.0; n_modes],
        }
    }

    pub fn n_modes(&self) -> usize {
        self.a.len()
    }

    /// Flat layout `[a0, a1, b1, a2, b2, ...]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + 2 * self.a.len());
        v.push(self.a0);
        for (a, b) in self.a.iter().zip(&self.b) {
            v.push(*a);
            v.push(*b);
        }
        v
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.is_empty() || v.len().is_multiple_of(2) {
            return Err(Error::invalid("coefficients", "expected 2N + 1 entries"));
        }
        Ok(Self {
            a0: v[0],
            a: v.iter().skip(1).step_by(2).copied().collect(),
            b: v.iter().skip(2).step_by(2).copied().collect(),
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            a0: c * self.a0,
            a: self.a.iter().map(|x| c * x).collect(),
            b: self.b.iter().map(|x| c * x).collect(),
        }
    }

    pub fn hdot(&self, s: f64) -> f64 {
        let mut v = self.a0;
        for (n, (a, b)) in self.a.iter().zip(&self.b).enumerate() {
            let w = std::f64::consts::TAU * (n + 1) as f64 * s;
            v += a * w.cos() + b * w.sin();
        }
        v
    }
}

/// `½‖ḣ‖²` by Parseval.
pub fn energy(coeffs: &FourierCoefficients) -> f64 {
    let oscillating: f64 = coeffs.a.iter().chain(&coeffs.b).map(|c| c * c).sum();
    0.5 * (coeffs.a0 * coeffs.a0 + 0.5 * oscillating)
}

fn energy_flat(c: &[f64]) -> f64 {
    0.5 * (c[0] * c[0] + 0.5 * c[1..].iter().map(|x| x * x).sum::<f64>())
}

fn basis_function(k: usize, s: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let w = std::f64::consts::TAU * k.div_ceil(2) as f64 * s;
    if k % 2 == 1 {
        w.cos()
    } else {
        w.sin()
    }
}

/// The Fourier basis pushed through the RKHS operator once, so each trial
/// path is a linear combination of precomputed columns.
#[derive(Debug, Clone)]
pub struct RitzBasis {
    n_modes: usize,
    dt: f64,
    /// `(K_H φ_k)(t_i)` for each basis function `k`.
    paths: Vec<Vec<f64>>,
    /// `φ_k(t_i)` at the grid nodes.
    node_values: Vec<Vec<f64>>,
}

impl RitzBasis {
    pub fn new(kg: &KernelGrid, n_modes: usize) -> Result<Self> {
        if (kg.grid().horizon() - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "kernel grid",
                "rate functionals need horizon 1",
            ));
        }
        let mids = kg.grid().midpoints();
        let nodes = kg.grid().nodes();
        let dim = 2 * n_modes + 1;
        let paths = (0..dim)
            .map(|k| {
                let hdot: Vec<f64> = mids.iter().map(|&s| basis_function(k, s)).collect();
                apply_rkhs_operator(kg, &hdot)
            })
            .collect::<Result<Vec<_>>>()?;
        let node_values = (0..dim)
            .map(|k| nodes.iter().map(|&s| basis_function(k, s)).collect())
            .collect();
        Ok(Self {
            n_modes,
            dt: kg.grid().dt(),
            paths,
            node_values,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dimension(&self) -> usize {
        self.paths.len()
    }

    fn combine(columns: &[Vec<f64>], c: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (col, &ck) in columns.iter().zip(c) {
            if ck != 0.0 {
                for (o, p) in out.iter_mut().zip(col) {
                    *o += ck * p;
                }
            }
        }
    }

    /// `(K_H ḣ)(t_i)` for flat coefficients.
    pub fn path(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.paths[0].len()];
        Self::combine(&self.paths, c, &mut out);
        out
    }

    /// `ḣ(t_i)` for flat coefficients.
    pub fn hdot_at_nodes(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.node_values[0].len()];
        Self::combine(&self.node_values, c, &mut out);
        out
    }

    /// `(F, G) = (∫ σ(f)^2, ∫ σ(f) ḣ)` by trapezoid on the grid.
    pub fn functionals(&self, vol: &VolFunction, c: &[f64]) -> (f64, f64) {
        let path = self.path(c);
        let hdot = self.hdot_at_nodes(c);
        let last = path.len() - 1;
        let mut f = 0.0;
        let mut g = 0.0;
        for (i, (y, h)) in path.iter().zip(&hdot).enumerate() {
            let w = if i == 0 || i == last { 0.5 } else { 1.0 };
            let s = vol.eval(*y);
            f += w * s * s;
            g += w * s * h;
        }
        (f * self.dt, g * self.dt)
    }
}

/// `F(f) = ∫_0^1 σ((K_H ḣ)(s))^2 ds`.
pub fn f_functional(
    kg: &KernelGrid,
    vol: &VolFunction,
    coeffs: &FourierCoefficients,
) -> Result<f64> {
    let basis = RitzBasis::new(kg, coeffs.n_modes())?;
    let path = basis.path(&coeffs.to_vec());
    let values: Vec<f64> = path.iter().map(|y| vol.eval(*y).powi(2)).collect();
    Ok(trapezoid(&values, kg.grid().dt()))
}

/// `G(f) = ∫_0^1 σ((K_H ḣ)(s)) ḣ(s) ds`.
pub fn g_functional(
    kg: &KernelGrid,
    vol: &VolFunction,
    coeffs: &FourierCoefficients,
) -> Result<f64> {
    let basis = RitzBasis::new(kg, coeffs.n_modes())?;
    Ok(basis.functionals(vol, &coeffs.to_vec()).1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    pub simplex: SimplexOptions,
    /// Coefficient magnitude beyond which the objective is treated as infinite.
    pub coeff_cap: f64,
    /// Points on the one-sided ray `[x, x + 2|x|]` searched for `Λ*`.
    pub lambda_grid: usize,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            simplex: SimplexOptions::default(),
            coeff_cap: 1e3,
            lambda_grid: 21,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub x: f64,
    pub rho: f64,
    pub value: f64,
    pub coeffs: FourierCoefficients,
    /// Most likely fBM path `(K_H ḣ)(t_i)` at the grid nodes.
    pub optimal_path: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Ritz solver bound to one kernel grid, volatility function and basis size.
#[derive(Debug, Clone)]
pub struct RateSolver {
    hurst: Hurst,
    vol: VolFunction,
    basis: RitzBasis,
    opts: RateOptions,
}

impl RateSolver {
    pub fn new(
        kg: &KernelGrid,
        vol: VolFunction,
        n_modes: usize,
        opts: RateOptions,
    ) -> Result<Self> {
        vol.validate()?;
        Ok(Self {
            hurst: kg.hurst(),
            vol,
            basis: RitzBasis::new(kg, n_modes)?,
            opts,
        })
    }

    pub fn hurst(&self) -> Hurst {
        self.hurst
    }

    pub fn vol(&self) -> &VolFunction {
        &self.vol
    }

    pub fn basis(&self) -> &RitzBasis {
        &self.basis
    }

    /// `I(x) = inf (x - ρG)^2 / (2 ρ̄^2 F) + Λ_H` over the ansatz.
    pub fn rate(&self, x: f64, rho: f64) -> Result<RateResult> {
        if !(rho.abs() < 1.0) {
            return Err(Error::invalid("rho", format!("{rho} is not in (-1, 1)")));
        }
        if !x.is_finite() {
            return Err(Error::invalid("x", "must be finite"));
        }
        let dim = self.basis.dimension();
        if x == 0.0 {
            return Ok(RateResult {
                x,
                rho,
                value: 0.0,
                coeffs: FourierCoefficients::zeros(self.basis.n_modes()),
                optimal_path: vec![0.0; self.basis.paths[0].len()],
                iterations: 0,
                evaluations: 0,
                converged: true,
            });
        }
        let rho_bar2 = 1.0 - rho * rho;
        let cap = self.opts.coeff_cap;
        let objective = |c: &[f64]| -> f64 {
            if c.iter().any(|v| v.abs() > cap) {
                return f64::INFINITY;
            }
            let (f, g) = self.basis.functionals(&self.vol, c);
            (x - rho * g).powi(2) / (2.0 * rho_bar2 * f) + energy_flat(c)
        };
        let res = nelder_mead(objective, &vec![0.0; dim], &self.opts.simplex);
        let at_cap = res.x.iter().any(|v| v.abs() > 0.99 * cap);
        Ok(RateResult {
            x,
            rho,
            value: res.value,
            optimal_path: self.basis.path(&res.x),
            coeffs: FourierCoefficients::from_slice(&res.x)?,
            iterations: res.iterations,
            evaluations: res.evaluations,
            converged: res.converged && !at_cap && res.value.is_finite(),
        })
    }

    /// `Λ*(x) = inf_{y ≥ x} I(y)` for `x > 0`, `inf_{y ≤ x} I(y)` for `x < 0`.
    pub fn lambda_star(&self, x: f64, rho: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        let n = self.opts.lambda_grid.max(2);
        let ys: Vec<f64> = (0..n)
            .map(|k| x + 2.0 * x * k as f64 / (n - 1) as f64)
            .collect();
        let values = ys
            .par_iter()
            .map(|&y| self.rate(y, rho).map(|r| r.value))
            .collect::<Result<Vec<_>>>()?;
        let (k, &best) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("grid is nonempty");
        if k == 0 || k == n - 1 {
            return Ok(best);
        }
        let refined = brent_minimize(
            |y| self.rate(y, rho).map(|r| r.value).unwrap_or(f64::INFINITY),
            ys[k - 1],
            ys[k + 1],
            1e-8,
            60,
        );
        Ok(refined.value.min(best))
    }
}

pub fn rate_uncorrelated(
    kg: &KernelGrid,
    vol: &VolFunction,
    x: f64,
    n_modes: usize,
    opts: &RateOptions,
) -> Result<RateResult> {
    RateSolver::new(kg, *vol, n_modes, *opts)?.rate(x, 0.0)
}

pub fn rate_correlated(
    kg: &KernelGrid,
    vol: &VolFunction,
    x: f64,
    rho: f64,
    n_modes: usize,
    opts: &RateOptions,
) -> Result<RateResult> {
    RateSolver::new(kg, *vol, n_modes, *opts)?.rate(x, rho)
}

pub fn lambda_star(
    kg: &KernelGrid,
    vol: &VolFunction,
    rho: f64,
    x: f64,
    n_modes: usize,
    opts: &RateOptions,
) -> Result<f64> {
    RateSolver::new(kg, *vol, n_modes, *opts)?.lambda_star(x, rho)
}
