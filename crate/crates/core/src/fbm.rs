//! Fractional Brownian motion: covariance, the Volterra kernel, its discretized
//! weight matrix on a uniform grid, the RKHS operator and path samplers.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;

use crate::error::{Error, Result};
use crate::quadrature::{gl16, gl32, gl64, integrate_left_singular};

/// Paths per RNG substream. Fixed so results do not depend on the worker count.
pub const CHUNK_PATHS: usize = 4096;

/// Deterministic RNG for chunk `chunk` of a run seeded with `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Hurst index in the open unit interval.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Hurst(f64);

impl Hurst {
    pub fn new(h: f64) -> Result<Self> {
        if h.is_finite() && h > 0.0 && h < 1.0 {
            Ok(Self(h))
        } else {
            Err(Error::invalid("hurst", format!("{h} is not in (0, 1)")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_brownian(self) -> bool {
        self.0 == 0.5
    }
}

impl TryFrom<f64> for Hurst {
    type Error = Error;
    fn try_from(h: f64) -> Result<Self> {
        Hurst::new(h)
    }
}

impl From<Hurst> for f64 {
    fn from(h: Hurst) -> f64 {
        h.0
    }
}

impl fmt::Display for Hurst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Uniform grid `t_i = i * horizon / n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    n_steps: usize,
    horizon: f64,
}

impl TimeGrid {
    pub fn new(n_steps: usize, horizon: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::invalid("n_steps", "must be positive"));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid(
                "horizon",
                format!("{horizon} is not positive"),
            ));
        }
        Ok(Self { n_steps, horizon })
    }

    pub fn unit(n_steps: usize) -> Result<Self> {
        Self::new(n_steps, 1.0)
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.node(i)).collect()
    }

    /// Cell midpoints `(t_{j-1} + t_j) / 2`, `j = 1..=n_steps`.
    pub fn midpoints(&self) -> Vec<f64> {
        (1..=self.n_steps)
            .map(|j| 0.5 * (self.node(j - 1) + self.node(j)))
            .collect()
    }
}

/// `Cov(B^H_s, B^H_t)`.
pub fn covariance(h: Hurst, s: f64, t: f64) -> Result<f64> {
    if s < 0.0 || t < 0.0 {
        return Err(Error::invalid("time", format!("negative time ({s}, {t})")));
    }
    let two_h = 2.0 * h.value();
    Ok(0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h)))
}

/// Volterra kernel `K_H(s, t)` for `0 < s < t`.
pub fn kernel_value(h: Hurst, s: f64, t: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::invalid("s", format!("{s} must be positive")));
    }
    if !(s < t) {
        return Err(Error::invalid("s", format!("{s} must be below t = {t}")));
    }
    if h.is_brownian() {
        return Ok(1.0);
    }
    Ok(t.powf(h.value() - 0.5) * unit_kernel(h.value(), s / t))
}

fn kernel_constant(h: f64) -> f64 {
    if h < 0.5 {
        (2.0 * h / ((1.0 - 2.0 * h) * beta(1.0 - 2.0 * h, h + 0.5))).sqrt()
    } else {
        (h * (2.0 * h - 1.0) / beta(2.0 - 2.0 * h, h - 0.5)).sqrt()
    }
}

/// `∫_0^d (s + w)^pow_u w^pow_w dw` with an integrable singularity at `w = 0`.
/// Panels double in width from `min(s, d)` so the `(s + w)` factor stays smooth.
fn inner_integral(s: f64, d: f64, pow_u: f64, pow_w: f64) -> f64 {
    let f = |w: f64| (s + w).powf(pow_u) * w.powf(pow_w);
    let first = s.min(d);
    let mut acc = integrate_left_singular(gl64(), 0.0, first, pow_w, f);
    let mut lo = first;
    while lo < d {
        let hi = (2.0 * lo).min(d);
        acc += gl32().integrate(lo, hi, f);
        lo = hi;
    }
    acc
}

/// `k(r) = K_H(r, 1)` for `0 < r < 1`; `K_H(s, t) = t^(H - 1/2) k(s / t)`.
pub(crate) fn unit_kernel(h: f64, r: f64) -> f64 {
    unit_kernel_gap(h, r, 1.0 - r)
}

/// `k(r)` with the gap `d = 1 - r` passed separately so that points next to
/// the diagonal keep full precision.
fn unit_kernel_gap(h: f64, r: f64, d: f64) -> f64 {
    if h == 0.5 {
        return 1.0;
    }
    let c = kernel_constant(h);
    if h < 0.5 {
        let inner = inner_integral(r, d, h - 1.5, h - 0.5);
        c * (r.powf(0.5 - h) * d.powf(h - 0.5) - (h - 0.5) * r.powf(0.5 - h) * inner)
    } else {
        c * r.powf(0.5 - h) * inner_integral(r, d, h - 0.5, h - 1.5)
    }
}

/// Geometric panels refining toward a singular endpoint.
const ENDPOINT_PANELS: i32 = 12;

/// `∫_0^len g(d) dd` for `g ~ d^alpha` near zero: one substituted panel at the
/// origin, then doubling panels so subleading terms stay resolved.
fn integrate_graded<F: Fn(f64) -> f64>(len: f64, alpha: f64, g: F) -> f64 {
    let first = len * 2f64.powi(-ENDPOINT_PANELS);
    let mut acc = integrate_left_singular(gl64(), 0.0, first, alpha, &g);
    let mut lo = first;
    while lo < len {
        let hi = (2.0 * lo).min(len);
        acc += gl32().integrate(lo, hi, &g);
        lo = hi;
    }
    acc
}

/// `∫_a^b k(r) dr` with graded panels at the singular ends 0 and 1.
fn unit_kernel_integral(h: f64, a: f64, b: f64) -> f64 {
    let near_zero = -(h - 0.5).abs();
    let near_one = h - 0.5;
    match (a == 0.0, b == 1.0) {
        (true, true) => unit_kernel_integral(h, 0.0, 0.5) + unit_kernel_integral(h, 0.5, 1.0),
        (true, false) => integrate_graded(b, near_zero, |r| unit_kernel(h, r)),
        (false, true) => integrate_graded(1.0 - a, near_one, |d| unit_kernel_gap(h, 1.0 - d, d)),
        (false, false) => gl16().integrate(a, b, |r| unit_kernel(h, r)),
    }
}

/// `∫_0^1 K_H(s, 1)^2 ds`, which equals `Var(B^H_1) = 1`.
pub fn unit_kernel_square_integral(h: Hurst) -> f64 {
    let h = h.value();
    if h == 0.5 {
        return 1.0;
    }
    integrate_graded(0.5, -2.0 * (h - 0.5).abs(), |r| unit_kernel(h, r).powi(2))
        + integrate_graded(0.5, 2.0 * h - 1.0, |d| {
            unit_kernel_gap(h, 1.0 - d, d).powi(2)
        })
}

/// `c_{0,H} = ∫_0^1 K_H(s, 1) ds`, so that `(K_H 1)(t) = c_{0,H} t^(H + 1/2)`.
pub fn unit_kernel_mass(h: Hurst) -> f64 {
    if h.is_brownian() {
        return 1.0;
    }
    unit_kernel_integral(h.value(), 0.0, 1.0)
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

type WeightRows = Vec<Vec<f64>>;
type WeightCache = Mutex<HashMap<(u64, usize), Arc<WeightRows>>>;

/// Unit-horizon cell integrals `∫_{t_{j-1}}^{t_j} K_H(s, t_i) ds`, row `i` holding
/// `j = 1..=i`. Uses `K_H(s, t) = t^(H - 1/2) k(s / t)` so each row is a difference
/// of one cumulative table `∫_0^r k` over the reduced fractions `j / i`.
fn unit_weights(h: f64, n: usize) -> Result<Arc<WeightRows>> {
    static CACHE: OnceLock<WeightCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (h.to_bits(), n);
    if let Some(hit) = cache.lock().expect("weight cache poisoned").get(&key) {
        return Ok(Arc::clone(hit));
    }
    let rows = Arc::new(compute_unit_weights(h, n)?);
    cache
        .lock()
        .expect("weight cache poisoned")
        .insert(key, Arc::clone(&rows));
    Ok(rows)
}

fn compute_unit_weights(h: f64, n: usize) -> Result<WeightRows> {
    let dt = 1.0 / n as f64;
    if h == 0.5 {
        return Ok((0..=n).map(|i| vec![dt; i]).collect());
    }
    let mut fractions: Vec<(u32, u32)> = Vec::new();
    for i in 1..=n as u32 {
        for j in 1..=i {
            if gcd(i, j) == 1 {
                fractions.push((j, i));
            }
        }
    }
    fractions.sort_by(|a, b| (a.0 as u64 * b.1 as u64).cmp(&(b.0 as u64 * a.1 as u64)));
    let pieces: Vec<f64> = fractions
        .par_iter()
        .enumerate()
        .map(|(m, &(p, q))| {
            let lo = if m == 0 {
                0.0
            } else {
                let (pp, qq) = fractions[m - 1];
                pp as f64 / qq as f64
            };
            unit_kernel_integral(h, lo, p as f64 / q as f64)
        })
        .collect();
    let mut cumulative: HashMap<(u32, u32), f64> = HashMap::with_capacity(fractions.len() + 1);
    cumulative.insert((0, 1), 0.0);
    let mut acc = 0.0;
    for (frac, piece) in fractions.iter().zip(&pieces) {
        acc += piece;
        cumulative.insert(*frac, acc);
    }
    let lookup = |j: u32, i: u32| -> f64 {
        let g = gcd(i, j).max(1);
        cumulative[&(j / g, i / g)]
    };
    let mut rows = Vec::with_capacity(n + 1);
    rows.push(Vec::new());
    for i in 1..=n as u32 {
        let scale = (i as f64 * dt).powf(h + 0.5);
        let mut row = Vec::with_capacity(i as usize);
        for j in 1..=i {
            let w = scale * (lookup(j, i) - lookup(j - 1, i));
            if !w.is_finite() {
                return Err(Error::Quadrature {
                    row: i as usize,
                    col: j as usize,
                });
            }
            row.push(w);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Discretized Volterra kernel and the covariances it induces on a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelGrid {
    hurst: Hurst,
    grid: TimeGrid,
    /// Cell integrals of the kernel; row `i` has entries for `j = 1..=i`.
    raw_weights: Vec<Vec<f64>>,
    /// `raw_weights` with each row scaled to reproduce `Var(B^H_{t_i})` exactly.
    weights: Vec<Vec<f64>>,
    cov_fbm: Vec<Vec<f64>>,
    cov_cross: Vec<Vec<f64>>,
}

impl KernelGrid {
    pub fn build(hurst: Hurst, grid: TimeGrid) -> Result<Self> {
        let n = grid.n_steps();
        if n < 2 {
            return Err(Error::invalid(
                "n_steps",
                "kernel grid needs at least 2 steps",
            ));
        }
        let unit = unit_weights(hurst.value(), n)?;
        let time_scale = grid.horizon().powf(hurst.value() + 0.5);
        let raw_weights: Vec<Vec<f64>> = unit
            .iter()
            .map(|row| row.iter().map(|w| w * time_scale).collect())
            .collect();

        let dt = grid.dt();
        let two_h = 2.0 * hurst.value();
        let weights = raw_weights
            .iter()
            .enumerate()
            .map(|(i, row)| {
                if i == 0 || hurst.is_brownian() {
                    return row.clone();
                }
                let var: f64 = row.iter().map(|w| w * w).sum::<f64>() / dt;
                let factor = (grid.node(i).powf(two_h) / var).sqrt();
                row.iter().map(|w| w * factor).collect()
            })
            .collect();

        let nodes = grid.nodes();
        let cov_fbm = nodes
            .iter()
            .map(|&s| {
                nodes
                    .iter()
                    .map(|&t| covariance(hurst, s, t))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;

        // Cov(B_{t_i}, B^H_{t_j}) = ∫_0^{t_i ∧ t_j} K_H(u, t_j) du.
        let cov_cross = (0..=n)
            .map(|i| {
                (0..=n)
                    .map(|j| raw_weights[j][..i.min(j)].iter().sum())
                    .collect()
            })
            .collect();

        Ok(Self {
            hurst,
            grid,
            raw_weights,
            weights,
            cov_fbm,
            cov_cross,
        })
    }

    pub fn hurst(&self) -> Hurst {
        self.hurst
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps()
    }

    pub fn raw_weights(&self) -> &[Vec<f64>] {
        &self.raw_weights
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn cov_fbm(&self) -> &[Vec<f64>] {
        &self.cov_fbm
    }

    pub fn cov_cross(&self) -> &[Vec<f64>] {
        &self.cov_cross
    }

    /// `Σ_j w_ij^2 / Δt` for the unscaled weights of row `i`.
    pub fn raw_row_variance(&self, i: usize) -> f64 {
        self.raw_weights[i].iter().map(|w| w * w).sum::<f64>() / self.grid.dt()
    }

    /// `Σ_j w_ij^2 / Δt` for the rescaled weights of row `i`.
    pub fn row_variance(&self, i: usize) -> f64 {
        self.weights[i].iter().map(|w| w * w).sum::<f64>() / self.grid.dt()
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    /// Cache file name for `(H, n_steps, horizon)`.
    pub fn cache_path(dir: &Path, hurst: Hurst, grid: &TimeGrid) -> PathBuf {
        dir.join(format!(
            "kernel_h{}_n{}_t{}.json",
            hurst.value(),
            grid.n_steps(),
            grid.horizon()
        ))
    }

    /// Loads a cached grid from `dir`, building and storing it when absent.
    pub fn load_or_build(hurst: Hurst, grid: TimeGrid, dir: &Path) -> Result<Self> {
        let path = Self::cache_path(dir, hurst, &grid);
        if let Ok(kg) = Self::load_json(&path) {
            if kg.hurst == hurst && kg.grid == grid {
                return Ok(kg);
            }
        }
        let kg = Self::build(hurst, grid)?;
        fs::create_dir_all(dir)?;
        kg.save_json(&path)?;
        Ok(kg)
    }

    /// Maps Brownian increments to the fBM path at the grid nodes (`path[0] = 0`).
    pub fn fbm_from_increments(&self, bm_increments: &[f64], path: &mut [f64]) {
        let dt = self.grid.dt();
        path[0] = 0.0;
        for (i, row) in self.weights.iter().enumerate().skip(1) {
            let acc: f64 = row.iter().zip(bm_increments).map(|(w, db)| w * db).sum();
            path[i] = acc / dt;
        }
    }
}

/// `(K_H ḣ)(t_i) = Σ_j w_ij ḣ(s_j)` with `ḣ` sampled at the cell midpoints.
pub fn apply_rkhs_operator(kg: &KernelGrid, hdot: &[f64]) -> Result<Vec<f64>> {
    let n = kg.n_steps();
    if hdot.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: hdot.len(),
        });
    }
    Ok(kg
        .raw_weights
        .iter()
        .map(|row| row.iter().zip(hdot).map(|(w, v)| w * v).sum())
        .collect())
}

/// One joint draw of the driving Brownian motion and the fBM built from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPathSample {
    pub bm_increments: Vec<f64>,
    pub fbm_path: Vec<f64>,
    /// Increments of an independent Brownian motion, present for correlated runs.
    pub independent_bm_increments: Option<Vec<f64>>,
}

/// Draws `n` i.i.d. `N(0, dt)` increments.
pub fn fill_increments<R: Rng + ?Sized>(rng: &mut R, dt: f64, out: &mut [f64]) {
    let sd = dt.sqrt();
    for x in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *x = sd * z;
    }
}

fn sample_chunk(
    kg: &KernelGrid,
    seed: u64,
    chunk: usize,
    count: usize,
    correlated: bool,
) -> Vec<GaussianPathSample> {
    let mut rng = chunk_rng(seed, chunk as u64);
    let n = kg.n_steps();
    let dt = kg.grid().dt();
    (0..count)
        .map(|_| {
            let mut db = vec![0.0; n];
            fill_increments(&mut rng, dt, &mut db);
            let dw = correlated.then(|| {
                let mut dw = vec![0.0; n];
                fill_increments(&mut rng, dt, &mut dw);
                dw
            });
            let mut path = vec![0.0; n + 1];
            kg.fbm_from_increments(&db, &mut path);
            GaussianPathSample {
                bm_increments: db,
                fbm_path: path,
                independent_bm_increments: dw,
            }
        })
        .collect()
}

/// Lazily generates `n_paths` samples, chunk by chunk, each chunk on its own
/// RNG substream so any prefix is reproducible from `(seed, chunk index)`.
pub fn sample_paths(
    kg: &KernelGrid,
    n_paths: usize,
    seed: u64,
    correlated: bool,
) -> impl Iterator<Item = GaussianPathSample> + '_ {
    let n_chunks = n_paths.div_ceil(CHUNK_PATHS);
    (0..n_chunks).flat_map(move |c| {
        let count = CHUNK_PATHS.min(n_paths - c * CHUNK_PATHS);
        sample_chunk(kg, seed, c, count, correlated)
    })
}

/// Exact marginal sampler from the Cholesky factor of `cov_fbm`; a cross-check
/// for the Volterra construction.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    factor: DMatrix<f64>,
}

impl CholeskySampler {
    pub fn new(kg: &KernelGrid) -> Result<Self> {
        let n = kg.n_steps();
        let cov = DMatrix::from_fn(n, n, |a, b| kg.cov_fbm[a + 1][b + 1]);
        let chol = cov.cholesky().ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { factor: chol.l() })
    }

    /// Path at the grid nodes, `path[0] = 0`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.factor.nrows();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &self.factor * z;
        std::iter::once(0.0).chain(x.iter().copied()).collect()
    }
}

/// Circulant-embedding sampler of fBM on `[0, 1]`. Each FFT yields two
/// independent paths.
pub struct DaviesHarteSampler {
    n_steps: usize,
    hurst: Hurst,
    sqrt_eigen: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for DaviesHarteSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DaviesHarteSampler")
            .field("n_steps", &self.n_steps)
            .field("hurst", &self.hurst)
            .finish()
    }
}

impl DaviesHarteSampler {
    pub fn new(hurst: Hurst, n_steps: usize) -> Result<Self> {
        if n_steps < 2 {
            return Err(Error::invalid("n_steps", "need at least 2 steps"));
        }
        let two_h = 2.0 * hurst.value();
        let gamma = |k: f64| {
            0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
        };
        let m = 2 * n_steps;
        let mut buf: Vec<Complex<f64>> = (0..m)
            .map(|k| {
                let lag = if k <= n_steps { k } else { m - k };
                Complex::new(gamma(lag as f64), 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut buf);
        let max = buf.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
        let mut sqrt_eigen = Vec::with_capacity(m);
        for c in &buf {
            if c.re < -1e-8 * max {
                return Err(Error::NotPositiveDefinite);
            }
            sqrt_eigen.push((c.re.max(0.0) / m as f64).sqrt());
        }
        Ok(Self {
            n_steps,
            hurst,
            sqrt_eigen,
            fft,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Two independent paths on `[0, 1]` at `n_steps + 1` nodes.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let mut buf: Vec<Complex<f64>> = self
            .sqrt_eigen
            .iter()
            .map(|s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(s * re, s * im)
            })
            .collect();
        self.fft.process(&mut buf);
        let scale = (1.0 / self.n_steps as f64).powf(self.hurst.value());
        let mut a = Vec::with_capacity(self.n_steps + 1);
        let mut b = Vec::with_capacity(self.n_steps + 1);
        let (mut sa, mut sb) = (0.0, 0.0);
        a.push(0.0);
        b.push(0.0);
        for c in &buf[..self.n_steps] {
            sa += c.re;
            sb += c.im;
            a.push(sa * scale);
            b.push(sb * scale);
        }
        (a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h(v: f64) -> Hurst {
        Hurst::new(v).unwrap()
    }

    #[test]
    fn hurst_rejects_out_of_range() {
        assert!(Hurst::new(0.0).is_err());
        assert!(Hurst::new(1.0).is_err());
        assert!(Hurst::new(f64::NAN).is_err());
        assert!(serde_json::from_str::<Hurst>("1.5").is_err());
        assert_eq!(serde_json::from_str::<Hurst>("0.25").unwrap(), h(0.25));
    }

    #[test]
    fn covariance_examples() {
        assert_eq!(covariance(h(0.5), 1.0, 2.0).unwrap(), 1.0);
        assert_relative_eq!(covariance(h(0.3), 1.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(
            covariance(h(0.25), 1.0, 2.0).unwrap(),
            0.5f64.sqrt(),
            epsilon = 1e-15
        );
        assert!(covariance(h(0.25), -1.0, 2.0).is_err());
    }

    #[test]
    fn kernel_domain_is_checked() {
        assert!(kernel_value(h(0.25), 0.0, 1.0).is_err());
        assert!(kernel_value(h(0.25), 1.0, 1.0).is_err());
        assert_eq!(kernel_value(h(0.5), 0.3, 0.7).unwrap(), 1.0);
    }

    #[test]
    fn kernel_matches_hypergeometric_values() {
        // Independent evaluation through c_H (t-s)^{H-1/2} 2F1(H-1/2, 1/2-H; H+1/2; 1-t/s).
        let cases = [
            (0.25, 0.01, 1.3263651823835),
            (0.25, 0.3, 0.7997646894342),
            (0.25, 0.9, 1.159100845704951),
            (0.75, 0.01, 1.90026365672),
            (0.75, 0.3, 1.06179378459),
            (0.75, 0.9, 0.6047730050),
        ];
        for (hv, s, expected) in cases {
            let k = kernel_value(h(hv), s, 1.0).unwrap();
            assert_relative_eq!(k, expected, max_relative = 1e-9);
        }
    }

    #[test]
    fn kernel_self_similarity() {
        let a = kernel_value(h(0.25), 0.6, 2.0).unwrap();
        let b = 2f64.powf(-0.25) * kernel_value(h(0.25), 0.3, 1.0).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-14);
    }

    #[test]
    fn kernel_square_integral_is_unit_variance() {
        for hv in [0.1, 0.25, 0.5, 0.75, 0.9] {
            let v = unit_kernel_square_integral(h(hv));
            assert_relative_eq!(v, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn kernel_mass_matches_reference() {
        let cases = [
            (0.1, 0.7876875024930081),
            (0.25, 0.9566978363004239),
            (0.75, 0.9504611797751379),
            (0.9, 0.7656221671016765),
        ];
        for (hv, expected) in cases {
            assert_relative_eq!(unit_kernel_mass(h(hv)), expected, max_relative = 1e-8);
        }
    }

    #[test]
    fn brownian_grid_is_trivial() {
        let kg = KernelGrid::build(h(0.5), TimeGrid::unit(10).unwrap()).unwrap();
        for (i, row) in kg.weights().iter().enumerate() {
            assert_eq!(row.len(), i);
            assert!(row.iter().all(|&w| w == 0.1));
        }
        let nodes = kg.grid().nodes();
        for i in 0..=10 {
            for j in 0..=10 {
                assert_relative_eq!(kg.cov_fbm()[i][j], nodes[i].min(nodes[j]), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn rescaled_rows_reproduce_variance() {
        let kg = KernelGrid::build(h(0.25), TimeGrid::new(50, 2.0).unwrap()).unwrap();
        for i in 1..=50 {
            let t = kg.grid().node(i);
            assert_relative_eq!(kg.row_variance(i), t.sqrt(), max_relative = 1e-12);
            assert_relative_eq!(kg.cov_fbm()[i][i], t.sqrt(), max_relative = 1e-12);
        }
    }

    #[test]
    fn weights_scale_with_horizon() {
        let a = KernelGrid::build(h(0.25), TimeGrid::new(20, 1.0).unwrap()).unwrap();
        let b = KernelGrid::build(h(0.25), TimeGrid::new(20, 0.01).unwrap()).unwrap();
        let s = 0.01f64.powf(0.75);
        assert_relative_eq!(
            b.raw_weights()[20][3],
            s * a.raw_weights()[20][3],
            max_relative = 1e-12
        );
    }

    #[test]
    fn cross_covariance_final_entry_is_kernel_mass() {
        let kg = KernelGrid::build(h(0.25), TimeGrid::unit(40).unwrap()).unwrap();
        assert_relative_eq!(
            kg.cov_cross()[40][40],
            unit_kernel_mass(h(0.25)),
            max_relative = 1e-9
        );
        assert_eq!(kg.cov_cross()[0][40], 0.0);
    }

    #[test]
    fn rkhs_operator_checks_length() {
        let kg = KernelGrid::build(h(0.25), TimeGrid::unit(10).unwrap()).unwrap();
        assert!(matches!(
            apply_rkhs_operator(&kg, &[1.0; 9]),
            Err(Error::LengthMismatch {
                expected: 10,
                actual: 9
            })
        ));
        let zero = apply_rkhs_operator(&kg, &[0.0; 10]).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn json_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = TimeGrid::unit(8).unwrap();
        let a = KernelGrid::load_or_build(h(0.3), grid, dir.path()).unwrap();
        assert!(KernelGrid::cache_path(dir.path(), h(0.3), &grid).exists());
        let b = KernelGrid::load_or_build(h(0.3), grid, dir.path()).unwrap();
        assert_eq!(a.weights(), b.weights());
    }

    #[test]
    fn brownian_paths_are_running_sums() {
        let kg = KernelGrid::build(h(0.5), TimeGrid::unit(16).unwrap()).unwrap();
        for sample in sample_paths(&kg, 20, 3, true) {
            let mut acc = 0.0;
            for (j, db) in sample.bm_increments.iter().enumerate() {
                acc += db;
                assert_relative_eq!(sample.fbm_path[j + 1], acc, epsilon = 1e-14);
            }
            assert!(sample.independent_bm_increments.is_some());
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let kg = KernelGrid::build(h(0.25), TimeGrid::unit(8).unwrap()).unwrap();
        let a: Vec<_> = sample_paths(&kg, CHUNK_PATHS + 5, 9, false).collect();
        let b: Vec<_> = sample_paths(&kg, CHUNK_PATHS + 5, 9, false).collect();
        assert_eq!(a.len(), CHUNK_PATHS + 5);
        assert_eq!(a, b);
    }

    #[test]
    fn davies_harte_variance() {
        let dh = DaviesHarteSampler::new(h(0.25), 64).unwrap();
        let mut rng = chunk_rng(1, 0);
        let m = 20_000;
        let mut sum2 = 0.0;
        for _ in 0..m / 2 {
            let (a, b) = dh.sample_pair(&mut rng);
            sum2 += a[64] * a[64] + b[64] * b[64];
        }
        let var = sum2 / m as f64;
        // s.e. of a chi-square variance estimate is sqrt(2/m).
        assert!((var - 1.0).abs() < 3.0 * (2.0 / m as f64).sqrt(), "{var}");
    }
}
