//! Implied-volatility smiles from rate functions, plus the Black–Scholes
//! pricing and inversion shared with the Monte Carlo engine.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::fbm::Hurst;
use crate::rate::{RateSolver, VolFunction};

/// Lower and upper ends of the implied-vol search bracket.
pub const VOL_BRACKET: (f64, f64) = (1e-8, 5.0);

/// Stand-in for `x = 0`, where `|x| / sqrt(2 Λ*)` is `0 / 0`.
pub const ATM_PROXY: f64 = 1e-3;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Call price for total standard deviation `sd = vol * sqrt(T)`.
pub fn bs_call_sd(spot: f64, strike: f64, sd: f64) -> f64 {
    if sd <= 0.0 {
        return (spot - strike).max(0.0);
    }
    let d1 = (spot / strike).ln() / sd + 0.5 * sd;
    spot * norm_cdf(d1) - strike * norm_cdf(d1 - sd)
}

/// Put price for total standard deviation `sd`.
pub fn bs_put_sd(spot: f64, strike: f64, sd: f64) -> f64 {
    if sd <= 0.0 {
        return (strike - spot).max(0.0);
    }
    let d1 = (spot / strike).ln() / sd + 0.5 * sd;
    strike * norm_cdf(sd - d1) - spot * norm_cdf(-d1)
}

/// Black–Scholes call with zero rates and dividends.
pub fn bs_call(spot: f64, strike: f64, maturity: f64, vol: f64) -> f64 {
    bs_call_sd(spot, strike, vol * maturity.sqrt())
}

pub fn bs_put(spot: f64, strike: f64, maturity: f64, vol: f64) -> f64 {
    bs_put_sd(spot, strike, vol * maturity.sqrt())
}

pub fn bs_vega(spot: f64, strike: f64, maturity: f64, vol: f64) -> f64 {
    let sd = vol * maturity.sqrt();
    if sd <= 0.0 {
        return 0.0;
    }
    let d1 = (spot / strike).ln() / sd + 0.5 * sd;
    spot * norm_pdf(d1) * maturity.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionKind {
    Call,
    Put,
}

fn invert(kind: OptionKind, price: f64, spot: f64, strike: f64, maturity: f64) -> Result<f64> {
    for (name, v) in [("spot", spot), ("strike", strike), ("maturity", maturity)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(name, format!("{v} must be positive")));
        }
    }
    let (intrinsic, bound) = match kind {
        OptionKind::Call => ((spot - strike).max(0.0), spot),
        OptionKind::Put => ((strike - spot).max(0.0), strike),
    };
    if !(price > intrinsic) {
        return Err(Error::BelowIntrinsic { price, intrinsic });
    }
    if price >= bound {
        return Err(Error::AboveUpperBound { price, bound });
    }
    let model = |vol: f64| match kind {
        OptionKind::Call => bs_call(spot, strike, maturity, vol),
        OptionKind::Put => bs_put(spot, strike, maturity, vol),
    };
    let (mut lo, mut hi) = VOL_BRACKET;
    if model(lo) > price || model(hi) < price {
        return Err(Error::VolOutOfBracket { lo, hi });
    }
    while hi - lo > 1e-15 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if model(mid) < price {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut vol = 0.5 * (lo + hi);
    // Newton polish, kept only while it shrinks the residual.
    for _ in 0..3 {
        let residual = model(vol) - price;
        let vega = bs_vega(spot, strike, maturity, vol);
        if vega <= 0.0 || residual == 0.0 {
            break;
        }
        let next = vol - residual / vega;
        if (model(next) - price).abs() < residual.abs() {
            vol = next;
        } else {
            break;
        }
    }
    Ok(vol)
}

/// Volatility reproducing a call price, by bisection then Newton polish.
pub fn implied_vol(price: f64, spot: f64, strike: f64, maturity: f64) -> Result<f64> {
    invert(OptionKind::Call, price, spot, strike, maturity)
}

/// Volatility reproducing a put price.
pub fn implied_vol_put(price: f64, spot: f64, strike: f64, maturity: f64) -> Result<f64> {
    invert(OptionKind::Put, price, spot, strike, maturity)
}

/// A call quote with its Black–Scholes price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsQuote {
    pub spot: f64,
    pub strike: f64,
    pub maturity: f64,
    pub vol: f64,
    pub price: f64,
}

impl BsQuote {
    pub fn new(spot: f64, strike: f64, maturity: f64, vol: f64) -> Self {
        Self {
            spot,
            strike,
            maturity,
            vol,
            price: bs_call(spot, strike, maturity, vol),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "order", rename_all = "lowercase")]
pub enum SmileOrder {
    First,
    /// Finite-maturity refinement at the given maturity.
    Second {
        maturity: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmilePoint {
    pub x: f64,
    pub sigma0: f64,
    pub lambda_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileCurve {
    pub hurst: Hurst,
    pub rho: f64,
    pub vol: VolFunction,
    pub order: SmileOrder,
    pub points: Vec<SmilePoint>,
}

impl SmileCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,sigma0,lambda_star\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.x, p.sigma0, p.lambda_star);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Refines each point to maturity `t`. Negative `x` uses the reflection
    /// `(x, ρ) -> (-x, -ρ)`, under which `Λ*` is unchanged.
    pub fn second_order(&self, t: f64) -> Result<SmileCurve> {
        let points = self
            .points
            .iter()
            .map(|p| {
                let sigma = if p.x == 0.0 {
                    p.sigma0
                } else {
                    second_order_vol(p.lambda_star, p.x.abs(), t, self.hurst)?
                };
                Ok(SmilePoint {
                    sigma0: sigma,
                    ..*p
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SmileCurve {
            order: SmileOrder::Second { maturity: t },
            points,
            ..self.clone()
        })
    }
}

/// `σ̂₀(x) = |x| / sqrt(2 Λ*(x))` over `xs`.
pub fn asymptotic_smile(solver: &RateSolver, rho: f64, xs: &[f64]) -> Result<SmileCurve> {
    let points = xs
        .par_iter()
        .map(|&x| {
            let probe = if x == 0.0 { ATM_PROXY } else { x };
            let ls = solver.lambda_star(probe, rho)?;
            if !(ls > 0.0) {
                return Err(Error::DegenerateRate { x: probe });
            }
            Ok(SmilePoint {
                x,
                sigma0: probe.abs() / (2.0 * ls).sqrt(),
                lambda_star: if x == 0.0 { 0.0 } else { ls },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SmileCurve {
        hurst: solver.hurst(),
        rho,
        vol: *solver.vol(),
        order: SmileOrder::First,
        points,
    })
}

/// Dimensionless implied vol from `L = |log c|` and log-strike `k > 0` via
/// `G[k, L - 3/2 log L + log(k / (4 sqrt π))]`.
pub fn gao_lee_total_vol(log_price: f64, k: f64) -> Result<f64> {
    let shift = -1.5 * log_price.ln() + (k / (4.0 * PI.sqrt())).ln();
    let lower = log_price + shift;
    let upper = lower + k;
    if !(lower > 0.0) {
        return Err(Error::ExpansionDomain { value: lower });
    }
    Ok(SQRT_2 * (upper.sqrt() - lower.sqrt()))
}

/// Finite-`t` implied vol with `L` replaced by its leading order `Λ*(x) / t^{2H}`.
pub fn second_order_vol(lambda_star: f64, x: f64, t: f64, h: Hurst) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::invalid("x", format!("{x} must be positive")));
    }
    if !(t > 0.0) {
        return Err(Error::invalid("t", format!("{t} must be positive")));
    }
    if !(lambda_star > 0.0) {
        return Err(Error::invalid(
            "lambda_star",
            format!("{lambda_star} must be positive"),
        ));
    }
    let h = h.value();
    let l = lambda_star / t.powf(2.0 * h);
    let k = x * t.powf(0.5 - h);
    Ok(gao_lee_total_vol(l, k)? / t.sqrt())
}
