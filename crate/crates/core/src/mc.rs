//! Monte Carlo for the rough volatility model
//! `dS = S σ(Y) (ρ dB + ρ̄ dW)`, `Y = B^H`, with `S_0 = 1`.
//!
//! Prices condition on the Brownian path driving `Y`: given it, `log S_t` is
//! Gaussian with mean `ρm - v/2` and variance `ρ̄² v`, where
//! `v = ∫σ(Y)² ds` and `m = ∫σ(Y) dB`.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::{
    chunk_rng, fill_increments, DaviesHarteSampler, Hurst, KernelGrid, TimeGrid, CHUNK_PATHS,
};
use crate::rate::VolFunction;
use crate::smile::{bs_call_sd, bs_put_sd, bs_vega, implied_vol, implied_vol_put, norm_cdf};
use crate::stats::Moments;

/// Seed used by the reproduction runs and the command-line defaults.
pub const DEFAULT_SEED: u64 = 20_240_611;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub vol: VolFunction,
    pub hurst: Hurst,
    pub rho: f64,
    pub spot: f64,
}

impl ModelSpec {
    pub fn new(vol: VolFunction, hurst: Hurst, rho: f64) -> Result<Self> {
        let spec = Self {
            vol,
            hurst,
            rho,
            spot: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.abs() < 1.0) {
            return Err(Error::invalid(
                "rho",
                format!("{} is not in (-1, 1)", self.rho),
            ));
        }
        if !(self.spot > 0.0) {
            return Err(Error::invalid("spot", "must be positive"));
        }
        self.vol.validate()
    }

    pub fn rho_bar(&self) -> f64 {
        (1.0 - self.rho * self.rho).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
    /// Seconds spent; not serialized so outputs stay reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

impl McEstimate {
    fn from_moments(m: &Moments, seed: u64, wall_time: f64) -> Self {
        Self {
            mean: m.mean,
            std_error: m.std_error(),
            n_samples: m.count,
            seed,
            wall_time,
        }
    }
}

/// Per-path summaries of the volatility path.
#[derive(Debug, Clone, Copy)]
struct PathIntegrals {
    /// `∫ σ(Y)^2 ds`
    v: f64,
    /// `∫ σ(Y) dB`
    m: f64,
    /// `∫ σ(Y) dW`, only when the orthogonal driver is drawn.
    m_perp: f64,
}

/// Unit-horizon kernel grid reused at every maturity by self-similarity.
struct PathEngine {
    kg: KernelGrid,
    model: ModelSpec,
    t: f64,
}

impl PathEngine {
    fn new(model: &ModelSpec, t: f64, n_steps: usize) -> Result<Self> {
        model.validate()?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid("maturity", format!("{t} must be positive")));
        }
        Ok(Self {
            kg: KernelGrid::build(model.hurst, TimeGrid::unit(n_steps)?)?,
            model: *model,
            t,
        })
    }

    /// Runs `per_path` over all paths, filling `width` values per path, with
    /// chunk-parallel accumulation merged in chunk order.
    fn run<F>(
        &self,
        n_paths: usize,
        seed: u64,
        with_perp: bool,
        width: usize,
        per_path: F,
    ) -> Vec<Moments>
    where
        F: Fn(&PathIntegrals, &mut [f64]) + Sync,
    {
        let n_chunks = n_paths.div_ceil(CHUNK_PATHS);
        let partials: Vec<Vec<Moments>> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let count = CHUNK_PATHS.min(n_paths - c * CHUNK_PATHS);
                let mut rng = chunk_rng(seed, c as u64);
                let mut acc = vec![Moments::default(); width];
                let mut values = vec![0.0; width];
                let mut scratch = Scratch::new(self.kg.n_steps());
                for _ in 0..count {
                    let p = self.simulate(&mut rng, &mut scratch, with_perp);
                    per_path(&p, &mut values);
                    for (a, v) in acc.iter_mut().zip(&values) {
                        a.push(*v);
                    }
                }
                acc
            })
            .collect();
        let mut total = vec![Moments::default(); width];
        for part in &partials {
            for (t, p) in total.iter_mut().zip(part) {
                t.merge(p);
            }
        }
        total
    }

    /// Single-valued convenience over [`PathEngine::run`].
    fn run_scalar<F>(&self, n_paths: usize, seed: u64, with_perp: bool, per_path: F) -> Moments
    where
        F: Fn(&PathIntegrals) -> f64 + Sync,
    {
        self.run(n_paths, seed, with_perp, 1, |p, out| out[0] = per_path(p))[0]
    }

    fn simulate(&self, rng: &mut ChaCha8Rng, s: &mut Scratch, with_perp: bool) -> PathIntegrals {
        let n = self.kg.n_steps();
        let unit_dt = 1.0 / n as f64;
        fill_increments(rng, unit_dt, &mut s.db);
        if with_perp {
            fill_increments(rng, unit_dt, &mut s.dw);
        }
        self.kg.fbm_from_increments(&s.db, &mut s.y);
        let y_scale = self.t.powf(self.model.hurst.value());
        let b_scale = self.t.sqrt();
        let dt = self.t * unit_dt;
        let (mut v, mut m, mut m_perp) = (0.0, 0.0, 0.0);
        for j in 0..n {
            // Left-point evaluation keeps the stochastic integral non-anticipating.
            let sigma = self.model.vol.eval(y_scale * s.y[j]);
            v += sigma * sigma * dt;
            m += sigma * b_scale * s.db[j];
            if with_perp {
                m_perp += sigma * b_scale * s.dw[j];
            }
        }
        PathIntegrals { v, m, m_perp }
    }
}

struct Scratch {
    db: Vec<f64>,
    dw: Vec<f64>,
    y: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            db: vec![0.0; n],
            dw: vec![0.0; n],
            y: vec![0.0; n + 1],
        }
    }
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < 2 {
        return Err(Error::invalid("n_paths", "need at least 2 paths"));
    }
    Ok(())
}

/// Conditional (Willard) call prices for several strikes on one path set.
/// Strikes below spot are priced through the put and put-call parity, which
/// keeps the out-of-the-money time value free of cancellation.
pub fn mc_call_prices(
    model: &ModelSpec,
    t: f64,
    strikes: &[f64],
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    check_paths(n_paths)?;
    let start = Instant::now();
    let engine = PathEngine::new(model, t, n_steps)?;
    let (rho, rho_bar, spot) = (model.rho, model.rho_bar(), model.spot);
    if let Some(&k) = strikes.iter().find(|&&k| !(k > 0.0)) {
        return Err(Error::invalid("strike", format!("{k} must be positive")));
    }
    let acc = engine.run(n_paths, seed, false, strikes.len(), |p, out| {
        let fwd = spot * (rho * p.m - 0.5 * rho * rho * p.v).exp();
        let sd = rho_bar * p.v.sqrt();
        for (o, &k) in out.iter_mut().zip(strikes) {
            *o = if k < spot {
                bs_put_sd(fwd, k, sd)
            } else {
                bs_call_sd(fwd, k, sd)
            };
        }
    });
    let elapsed = start.elapsed().as_secs_f64();
    Ok(strikes
        .iter()
        .zip(&acc)
        .map(|(&k, m)| {
            let mut est = McEstimate::from_moments(m, seed, elapsed);
            if k < spot {
                est.mean += spot - k;
            }
            est
        })
        .collect())
}

/// Conditional (Willard) estimate of `E[(S_t - K)^+]`.
pub fn mc_call_price(
    model: &ModelSpec,
    t: f64,
    strike: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<McEstimate> {
    Ok(mc_call_prices(model, t, &[strike], n_paths, n_steps, seed)?.remove(0))
}

/// Plain payoff average with the orthogonal driver simulated; the baseline
/// the conditional estimator improves on.
pub fn mc_call_price_plain(
    model: &ModelSpec,
    t: f64,
    strike: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_paths(n_paths)?;
    let start = Instant::now();
    let engine = PathEngine::new(model, t, n_steps)?;
    let (rho, rho_bar, spot) = (model.rho, model.rho_bar(), model.spot);
    let acc = engine.run_scalar(n_paths, seed, true, |p| {
        let s_t = spot * (rho * p.m + rho_bar * p.m_perp - 0.5 * p.v).exp();
        (s_t - strike).max(0.0)
    });
    Ok(McEstimate::from_moments(
        &acc,
        seed,
        start.elapsed().as_secs_f64(),
    ))
}

/// `P(X_t > x t^{1/2-H})` for `x > 0`, `P(X_t < x t^{1/2-H})` for `x < 0`,
/// averaging the conditional Gaussian probability given the `B` path.
pub fn mc_digital_prob(
    model: &ModelSpec,
    t: f64,
    x: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_paths(n_paths)?;
    if x == 0.0 {
        return Err(Error::invalid("x", "must be nonzero"));
    }
    let start = Instant::now();
    let engine = PathEngine::new(model, t, n_steps)?;
    let (rho, rho_bar) = (model.rho, model.rho_bar());
    let threshold = x * t.powf(0.5 - model.hurst.value()) - model.spot.ln();
    let acc = engine.run_scalar(n_paths, seed, false, |p| {
        let mean = rho * p.m - 0.5 * p.v;
        let z = (mean - threshold) / (rho_bar * p.v.sqrt());
        if x > 0.0 {
            norm_cdf(z)
        } else {
            norm_cdf(-z)
        }
    });
    Ok(McEstimate::from_moments(
        &acc,
        seed,
        start.elapsed().as_secs_f64(),
    ))
}

/// `E[S_t]` with both drivers simulated.
pub fn mc_martingale_check(
    model: &ModelSpec,
    t: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_paths(n_paths)?;
    let start = Instant::now();
    let engine = PathEngine::new(model, t, n_steps)?;
    let (rho, rho_bar, spot) = (model.rho, model.rho_bar(), model.spot);
    let acc = engine.run_scalar(n_paths, seed, true, |p| {
        spot * (rho * p.m + rho_bar * p.m_perp - 0.5 * p.v).exp()
    });
    Ok(McEstimate::from_moments(
        &acc,
        seed,
        start.elapsed().as_secs_f64(),
    ))
}

/// Implied vol backed out of a Monte Carlo price, with its delta-method error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McImpliedVol {
    pub x: f64,
    pub strike: f64,
    pub price: McEstimate,
    pub implied_vol: f64,
    pub vol_std_error: f64,
}

/// Implied vols at strikes `exp(x t^{1/2-H})` over the log-moneyness grid `xs`.
pub fn mc_implied_vols(
    model: &ModelSpec,
    t: f64,
    xs: &[f64],
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<McImpliedVol>> {
    let scale = t.powf(0.5 - model.hurst.value());
    let strikes: Vec<f64> = xs.iter().map(|x| model.spot * (x * scale).exp()).collect();
    let prices = mc_call_prices(model, t, &strikes, n_paths, n_steps, seed)?;
    xs.iter()
        .zip(strikes)
        .zip(prices)
        .map(|((&x, k), price)| {
            let spot = model.spot;
            let vol = if k < spot {
                implied_vol_put(price.mean - (spot - k), spot, k, t)?
            } else {
                implied_vol(price.mean, spot, k, t)?
            };
            let vega = bs_vega(spot, k, t, vol);
            Ok(McImpliedVol {
                x,
                strike: k,
                price,
                implied_vol: vol,
                vol_std_error: price.std_error / vega,
            })
        })
        .collect()
}

/// Samples for the exponential-functional limit laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpFunctionalSamples {
    pub hurst: Hurst,
    pub t: f64,
    pub n_steps: usize,
    /// `t^{-H} log(A_t / t)`, `A_t = ∫_0^t exp(2 B^H_s) ds`.
    pub statistic: Vec<f64>,
    /// `t^{-H} (log A_t^{(μ)} - 2μt)` when `μ > 0`.
    pub drift_statistic: Option<Vec<f64>>,
    /// `2 max_{[0,1]} B^H` from independent paths.
    pub max_reference: Vec<f64>,
    /// `2 Z`, `Z ~ N(0, 1)`.
    pub normal_reference: Vec<f64>,
}

/// Grid size for the functional at horizon `t`: at least `100 t` steps
/// (capped at one million), rounded up to a power of two.
pub fn exp_functional_steps(n_steps: usize, t: f64) -> usize {
    let scaled = (100.0 * t).ceil().min(1e6) as usize;
    n_steps.max(scaled).max(2).next_power_of_two()
}

/// `log ∫_0^1 exp(g(u)) du` by the trapezoid rule, evaluated stably.
fn log_trapezoid_exp(g: &[f64]) -> f64 {
    let n = g.len() - 1;
    let top = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut acc = 0.0;
    for (i, v) in g.iter().enumerate() {
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        acc += w * (v - top).exp();
    }
    top + (acc / n as f64).ln()
}

const EXP_CHUNK: usize = 64;

/// Samples the rescaled exponential functionals over `[0, t]` using
/// `B^H_{tu} = t^H B^H_u` in law, with circulant-embedding paths on `[0, 1]`.
pub fn mc_exponential_functional(
    h: Hurst,
    t: f64,
    mu: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<ExpFunctionalSamples> {
    check_paths(n_paths)?;
    if !(t > 0.0) {
        return Err(Error::invalid("t", format!("{t} must be positive")));
    }
    let m = exp_functional_steps(n_steps, t);
    let sampler = DaviesHarteSampler::new(h, m)?;
    let th = t.powf(h.value());
    let with_drift = mu > 0.0;
    let n_chunks = n_paths.div_ceil(EXP_CHUNK);
    type Row = (f64, Option<f64>, f64, f64);
    let rows: Vec<Row> = (0..n_chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let count = EXP_CHUNK.min(n_paths - c * EXP_CHUNK);
            let mut rng = chunk_rng(seed, c as u64);
            let mut g = vec![0.0; m + 1];
            (0..count)
                .map(|_| {
                    let (path, reference) = sampler.sample_pair(&mut rng);
                    for (gi, b) in g.iter_mut().zip(&path) {
                        *gi = 2.0 * th * b;
                    }
                    let stat = log_trapezoid_exp(&g) / th;
                    let drift = with_drift.then(|| {
                        for (i, (gi, b)) in g.iter_mut().zip(&path).enumerate() {
                            let u = i as f64 / m as f64;
                            *gi = 2.0 * (mu * t * u + th * b);
                        }
                        (log_trapezoid_exp(&g) - 2.0 * mu * t) / th
                    });
                    let max = reference.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let z: f64 = rng.sample(StandardNormal);
                    (stat, drift, 2.0 * max, 2.0 * z)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(ExpFunctionalSamples {
        hurst: h,
        t,
        n_steps: m,
        statistic: rows.iter().map(|r| r.0).collect(),
        drift_statistic: with_drift.then(|| rows.iter().map(|r| r.1.unwrap_or(f64::NAN)).collect()),
        max_reference: rows.iter().map(|r| r.2).collect(),
        normal_reference: rows.iter().map(|r| r.3).collect(),
    })
}
