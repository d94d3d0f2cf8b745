//! Large-time asymptotics: the absorbed CEV density and its rate function,
//! the variational rate `J(a)` of the time change `∫|Y|^{2p}`, and the rate of
//! the time-changed CEV price.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::fbm::{Hurst, KernelGrid};
use crate::optim::{brent_minimize, nelder_mead, SimplexOptions};
use crate::quadrature::{gl32, gl64, integrate_left_singular, trapezoid};
use crate::rate::{energy, FourierCoefficients, RitzBasis};

/// Argument below which `I_ν` is summed as a power series.
pub fn bessel_crossover(nu: f64) -> f64 {
    15.0 + nu
}

/// `e^{-z} I_ν(z)` by the ascending series. Accurate for any `z`, but slow
/// once `z` is large.
pub fn bessel_i_scaled_series(nu: f64, z: f64) -> f64 {
    if z == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    let half = 0.5 * z;
    let q = half * half;
    let mut term = (nu * half.ln() - ln_gamma(nu + 1.0) - z).exp();
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + nu));
        sum += term;
        if term <= 1e-17 * sum || k > 10_000.0 {
            break;
        }
    }
    sum
}

/// `e^{-z} I_ν(z)` by the large-argument expansion, truncated at its
/// smallest term.
pub fn bessel_i_scaled_asymptotic(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        let odd = 2.0 * k - 1.0;
        let next = -term * (mu - odd * odd) / (8.0 * k * z);
        if next == 0.0 || next.abs() >= term.abs() || k > 200.0 {
            break;
        }
        sum += next;
        term = next;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * PI * z).sqrt()
}

/// `e^{-z} I_ν(z)`, safe from overflow.
pub fn bessel_i_scaled(nu: f64, z: f64) -> f64 {
    if z < bessel_crossover(nu) {
        bessel_i_scaled_series(nu, z)
    } else {
        bessel_i_scaled_asymptotic(nu, z)
    }
}

/// Modified Bessel function of the first kind, `I_ν(z)` for `ν, z ≥ 0`.
pub fn bessel_i(nu: f64, z: f64) -> f64 {
    bessel_i_scaled(nu, z) * z.exp()
}

/// `ln I_ν(z)`, finite wherever `I_ν(z) > 0`.
pub fn ln_bessel_i(nu: f64, z: f64) -> f64 {
    bessel_i_scaled(nu, z).ln() + z
}

/// Constant-elasticity diffusion `dS = σ S^β dW`, absorbed at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CevSpec {
    pub beta: f64,
    pub sigma: f64,
}

impl CevSpec {
    pub fn new(beta: f64, sigma: f64) -> Result<Self> {
        let spec = Self { beta, sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::invalid(
                "beta",
                format!("{} is not in (0, 1)", self.beta),
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(
                "sigma",
                format!("{} is not positive", self.sigma),
            ));
        }
        Ok(())
    }

    /// `β - 1`, always negative.
    pub fn beta_bar(&self) -> f64 {
        self.beta - 1.0
    }

    /// Bessel order `1 / (2|β̄|)`.
    pub fn nu(&self) -> f64 {
        0.5 / self.beta_bar().abs()
    }

    fn b(&self) -> f64 {
        self.beta_bar().abs()
    }

    /// `2 σ² β̄²`, the denominator shared by the density and the rate.
    fn scale(&self) -> f64 {
        2.0 * self.sigma * self.sigma * self.beta_bar().powi(2)
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{v} is not positive")))
    }
}

/// Log of the transition density of the absorbed CEV process on `S > 0`.
pub fn cev_log_density(spec: &CevSpec, t: f64, s0: f64, s: f64) -> Result<f64> {
    spec.validate()?;
    check_positive("t", t)?;
    check_positive("s0", s0)?;
    check_positive("s", s)?;
    let b = spec.b();
    let c = spec.scale() * t;
    let (u0, u) = (s0.powf(b), s.powf(b));
    let z = 2.0 * u0 * u / c;
    Ok((2.0 * b - 1.5) * s.ln() + 0.5 * s0.ln()
        - (spec.sigma * spec.sigma * b * t).ln()
        - (u0 * u0 + u * u) / c
        + ln_bessel_i(spec.nu(), z))
}

pub fn cev_density(spec: &CevSpec, t: f64, s0: f64, s: f64) -> Result<f64> {
    cev_log_density(spec, t, s0, s).map(f64::exp)
}

/// Probability that the process started at `s0` has been absorbed by `t`.
pub fn cev_absorption_probability(spec: &CevSpec, t: f64, s0: f64) -> Result<f64> {
    spec.validate()?;
    check_positive("t", t)?;
    check_positive("s0", s0)?;
    Ok(gamma_ur(
        spec.nu(),
        s0.powf(2.0 * spec.b()) / (spec.scale() * t),
    ))
}

/// `∫_0^∞ p(t, s0, S) dS` by composite Gauss–Legendre quadrature.
pub fn cev_mass(spec: &CevSpec, t: f64, s0: f64) -> Result<f64> {
    const PANELS: usize = 400;
    spec.validate()?;
    check_positive("t", t)?;
    check_positive("s0", s0)?;
    let b = spec.b();
    // In `R = S^b / (σ b)` the process is close to a Bessel process with unit
    // diffusion, so twelve standard deviations past the start bound the support.
    let r0 = s0.powf(b) / (spec.sigma * b);
    let s_max = (spec.sigma * b * (r0 + 12.0 * t.sqrt())).powf(1.0 / b);
    let width = s_max / PANELS as f64;
    let density = |s: f64| {
        if s > 0.0 {
            cev_density(spec, t, s0, s).unwrap_or(0.0)
        } else {
            0.0
        }
    };
    // Near zero the density behaves like S^{2b - 1}.
    let mut mass = integrate_left_singular(gl64(), 0.0, width, 2.0 * b - 1.0, density);
    for k in 1..PANELS {
        mass += gl32().integrate(k as f64 * width, (k + 1) as f64 * width, density);
    }
    Ok(mass)
}

/// `I_β(S) = S^{2|β̄|} / (2 σ² β̄²)`.
pub fn cev_rate(spec: &CevSpec, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    s.powf(2.0 * spec.b()) / spec.scale()
}

/// `-t^{-ζ} log(t^q p(t, s0, S t^q))` with `ζ = 2|β̄|q - 1`, the finite-time
/// proxy for the rate of `S_t / t^q`.
pub fn cev_scaled_log_density(spec: &CevSpec, t: f64, s0: f64, s: f64, q: f64) -> Result<f64> {
    let zeta = cev_speed_exponent(spec, q)?;
    let log_q = q * t.ln() + cev_log_density(spec, t, s0, s * t.powf(q))?;
    Ok(-log_q / t.powf(zeta))
}

/// Speed exponent `ζ = 2|β̄|q - 1` of `S_t / t^q`; requires `q > 1/(2|β̄|)`.
pub fn cev_speed_exponent(spec: &CevSpec, q: f64) -> Result<f64> {
    spec.validate()?;
    if !(q > spec.nu()) {
        return Err(Error::invalid(
            "q",
            format!("{q} must exceed {}", spec.nu()),
        ));
    }
    Ok(2.0 * spec.b() * q - 1.0)
}

/// Limit of [`cev_scaled_log_density`] as `t → ∞`, extrapolated from three
/// times. The finite-time value is `L + (α ln t + γ) t^{-ζ}` up to terms of
/// smaller order, so three samples determine `L`.
pub fn cev_extrapolated_rate(spec: &CevSpec, s0: f64, s: f64, q: f64, ts: [f64; 3]) -> Result<f64> {
    let zeta = cev_speed_exponent(spec, q)?;
    let mut m = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (row, &t) in ts.iter().enumerate() {
        check_positive("t", t)?;
        let decay = t.powf(-zeta);
        m[(row, 0)] = 1.0;
        m[(row, 1)] = decay * t.ln();
        m[(row, 2)] = decay;
        rhs[row] = cev_scaled_log_density(spec, t, s0, s, q)?;
    }
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::invalid("ts", "extrapolation times must be distinct"))?;
    Ok(sol[0])
}

/// `ψ(f) = ∫_0^1 |f|^{2p}` by trapezoid on the grid nodes.
pub fn psi(path: &[f64], p: f64, dt: f64) -> f64 {
    let values: Vec<f64> = path.iter().map(|y| y.abs().powf(2.0 * p)).collect();
    trapezoid(&values, dt)
}

/// Solution of `J(1) = inf {Λ_H(f) : ψ(f) = 1}` over the Fourier ansatz;
/// `J(a) = a^{1/p} J(1)` follows from the scaling of `Λ_H` and `ψ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JRate {
    pub p: f64,
    pub hurst: Hurst,
    pub j_one: f64,
    /// Minimizer normalized so that `ψ = 1`.
    pub coeffs: FourierCoefficients,
    pub converged: bool,
}

impl JRate {
    /// Minimizes the scale-free ratio `Λ_H(f) / ψ(f)^{1/p}`. A penalty on
    /// `Λ_H - ½` pins the otherwise free scale and vanishes at the optimum.
    pub fn solve(kg: &KernelGrid, p: f64, n_modes: usize, opts: &SimplexOptions) -> Result<Self> {
        check_positive("p", p)?;
        let basis = RitzBasis::new(kg, n_modes)?;
        let dt = kg.grid().dt();
        let objective = |c: &[f64]| -> f64 {
            let e = energy_of(c);
            let s = psi(&basis.path(c), p, dt);
            if !(s > 0.0) {
                return f64::INFINITY;
            }
            e / s.powf(1.0 / p) + (e - 0.5).powi(2)
        };
        let mut x0 = vec![0.0; basis.dimension()];
        x0[0] = 1.0;
        let res = nelder_mead(objective, &x0, opts);
        let s = psi(&basis.path(&res.x), p, dt);
        let e = energy_of(&res.x);
        if !(s > 0.0 && e.is_finite()) {
            return Err(Error::invalid(
                "p",
                "time-change functional vanished at the optimum",
            ));
        }
        let coeffs = FourierCoefficients::from_slice(&res.x)?.scaled(s.powf(-0.5 / p));
        Ok(Self {
            p,
            hurst: kg.hurst(),
            j_one: e / s.powf(1.0 / p),
            coeffs,
            converged: res.converged,
        })
    }

    /// `J(a)`, zero for `a ≤ 0`.
    pub fn at(&self, a: f64) -> f64 {
        if a <= 0.0 {
            0.0
        } else {
            a.powf(1.0 / self.p) * self.j_one
        }
    }
}

fn energy_of(c: &[f64]) -> f64 {
    FourierCoefficients::from_slice(c).map_or(f64::INFINITY, |f| energy(&f))
}

/// `J(a)` through the scaling reduction.
pub fn j_rate(
    kg: &KernelGrid,
    p: f64,
    a: f64,
    n_modes: usize,
    opts: &SimplexOptions,
) -> Result<f64> {
    check_positive("a", a)?;
    Ok(JRate::solve(kg, p, n_modes, opts)?.at(a))
}

/// `J(a)` by direct quadratic-penalty minimization of
/// `Λ_H(f) + μ (ψ(f) - a)^2` with increasing `μ`. Independent of the scaling
/// argument, and therefore a cross-check on [`j_rate`].
pub fn j_rate_penalty(
    kg: &KernelGrid,
    p: f64,
    a: f64,
    n_modes: usize,
    opts: &SimplexOptions,
) -> Result<f64> {
    check_positive("p", p)?;
    check_positive("a", a)?;
    let basis = RitzBasis::new(kg, n_modes)?;
    let dt = kg.grid().dt();
    let mut x = vec![0.0; basis.dimension()];
    x[0] = 1.0;
    let mut value = f64::INFINITY;
    for mu in [1e2, 1e4, 1e6, 1e8] {
        let objective = |c: &[f64]| -> f64 {
            let s = psi(&basis.path(c), p, dt);
            energy_of(c) + mu * (s - a).powi(2)
        };
        let res = nelder_mead(objective, &x, opts);
        x = res.x;
        value = energy_of(&x);
    }
    Ok(value)
}

/// Rate of the time-changed CEV price together with both optimal times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvRate {
    pub s: f64,
    pub rate: f64,
    /// Minimizer over `a` found by Brent's method.
    pub a_numeric: f64,
    /// `(A p / J(1))^{p/(p+1)}`.
    pub a_closed_form: f64,
}

/// `inf_a [S^{2|β̄|} / (2σ²β̄² a) + J(a)]`.
pub fn sv_rate(spec: &CevSpec, j: &JRate, s: f64) -> Result<SvRate> {
    spec.validate()?;
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::invalid(
            "s",
            format!("{s} is not a finite non-negative number"),
        ));
    }
    if s == 0.0 {
        return Ok(SvRate {
            s,
            rate: 0.0,
            a_numeric: 0.0,
            a_closed_form: 0.0,
        });
    }
    let big_a = cev_rate(spec, s);
    let p = j.p;
    let objective = |ln_a: f64| {
        let a = ln_a.exp();
        big_a / a + j.at(a)
    };
    let res = brent_minimize(objective, -40.0, 40.0, 1e-12, 500);
    let a_closed_form = (big_a * p / j.j_one).powf(p / (p + 1.0));
    Ok(SvRate {
        s,
        rate: res.value,
        a_numeric: res.x.exp(),
        a_closed_form,
    })
}

/// Which large-time regime a [`LargeTimeRate`] describes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LargeTimeModel {
    /// `S_t / t^q` for the plain CEV process.
    Cev { spec: CevSpec },
    /// CEV driven by the clock `∫_0^t |y_0 + B^H_s|^{2p} ds`.
    FractionalCev { spec: CevSpec, j: JRate },
}

/// LDP for `S_t / t^q` with speed `t^{speed_exponent}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeTimeRate {
    pub q_exponent: f64,
    pub speed_exponent: f64,
    pub model: LargeTimeModel,
}

impl LargeTimeRate {
    pub fn cev(spec: CevSpec, q: f64) -> Result<Self> {
        Ok(Self {
            q_exponent: q,
            speed_exponent: cev_speed_exponent(&spec, q)?,
            model: LargeTimeModel::Cev { spec },
        })
    }

    /// The clock grows like `t^{1+2p}` with speed `t^{2-2H}`, giving
    /// `q = (3 - 2H + 2p) / (2|β̄|)`.
    pub fn fractional_cev(spec: CevSpec, j: JRate) -> Result<Self> {
        spec.validate()?;
        let h = j.hurst.value();
        Ok(Self {
            q_exponent: (3.0 - 2.0 * h + 2.0 * j.p) * spec.nu(),
            speed_exponent: 2.0 - 2.0 * h,
            model: LargeTimeModel::FractionalCev { spec, j },
        })
    }

    /// `I(S)`, using the closed-form optimal time for the time-changed case.
    pub fn rate(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match &self.model {
            LargeTimeModel::Cev { spec } => cev_rate(spec, s),
            LargeTimeModel::FractionalCev { spec, j } => {
                let big_a = cev_rate(spec, s);
                let a = (big_a * j.p / j.j_one).powf(j.p / (j.p + 1.0));
                big_a / a + j.at(a)
            }
        }
    }
}
