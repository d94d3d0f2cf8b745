//! Derivative-free minimizers: restarted Nelder–Mead and Brent's 1-D method.

use serde::{Deserialize, Serialize};

/// Stopping rules and restart policy for [`nelder_mead`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexOptions {
    /// Largest vertex distance (sup norm) from the best vertex at convergence.
    pub x_tol: f64,
    /// Largest value spread across the simplex at convergence.
    pub f_tol: f64,
    /// Evaluation budget per run.
    pub max_evals: usize,
    /// Extra runs started from the previous optimum.
    pub restarts: usize,
    /// Initial edge for coordinates equal to zero.
    pub zero_step: f64,
    /// Initial edge relative to nonzero coordinates.
    pub relative_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            x_tol: 1e-8,
            f_tol: 1e-10,
            max_evals: 40_000,
            restarts: 3,
            zero_step: 0.025,
            relative_step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

struct Run {
    x: Vec<f64>,
    value: f64,
    iterations: usize,
    evaluations: usize,
    converged: bool,
}

/// Minimizes `f` from `x0`, restarting from each optimum until a restart no
/// longer improves by more than `f_tol`. Non-finite values count as `+inf`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    opts: &SimplexOptions,
) -> SimplexResult {
    let mut best = single_run(&mut f, x0, opts);
    let mut iterations = best.iterations;
    let mut evaluations = best.evaluations;
    let mut converged = best.converged;
    for _ in 0..opts.restarts {
        let next = single_run(&mut f, &best.x, opts);
        iterations += next.iterations;
        evaluations += next.evaluations;
        let gain = best.value - next.value;
        if next.value <= best.value {
            converged = next.converged;
            best = next;
        }
        if gain <= opts.f_tol {
            break;
        }
    }
    SimplexResult {
        x: best.x,
        value: best.value,
        iterations,
        evaluations,
        converged,
    }
}

fn single_run<F: FnMut(&[f64]) -> f64>(f: &mut F, x0: &[f64], opts: &SimplexOptions) -> Run {
    let n = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        let value = eval(x0, &mut evaluations);
        return Run {
            x: Vec::new(),
            value,
            iterations: 0,
            evaluations,
            converged: true,
        };
    }

    // Dimension-adaptive coefficients keep the method effective beyond a few dimensions.
    let dim = n as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / dim, 0.75 - 0.5 / dim, 1.0 - 1.0 / dim);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] = if v[i] != 0.0 {
            v[i] * (1.0 + opts.relative_step)
        } else {
            opts.zero_step
        };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evaluations)).collect();

    let mut iterations = 0;
    let mut converged = false;
    let mut order: Vec<usize> = (0..=n).collect();
    while evaluations < opts.max_evals {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let b = order[0];
        let w = order[n];
        let sw = order[n - 1];

        let spread = values
            .iter()
            .map(|v| (v - values[b]).abs())
            .fold(0.0, f64::max);
        let diameter = simplex
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[b]).map(|(a, c)| (a - c).abs()))
            .fold(0.0, f64::max);
        if diameter < opts.x_tol && spread < opts.f_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for &k in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[k]) {
                *c += x / dim;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[w])
                .map(|(c, x)| c + t * (c - x))
                .collect()
        };

        let xr = along(alpha);
        let fr = eval(&xr, &mut evaluations);
        if fr < values[b] {
            let xe = along(gamma);
            let fe = eval(&xe, &mut evaluations);
            if fe < fr {
                simplex[w] = xe;
                values[w] = fe;
            } else {
                simplex[w] = xr;
                values[w] = fr;
            }
            continue;
        }
        if fr < values[sw] {
            simplex[w] = xr;
            values[w] = fr;
            continue;
        }
        // Outside contraction when the reflection helped at all, inside otherwise.
        let xc = if fr < values[w] {
            along(rho * alpha)
        } else {
            along(-rho)
        };
        let fc = eval(&xc, &mut evaluations);
        if fc < values[w].min(fr) {
            simplex[w] = xc;
            values[w] = fc;
            continue;
        }
        let best = simplex[b].clone();
        for k in 0..=n {
            if k == b {
                continue;
            }
            for (x, c) in simplex[k].iter_mut().zip(&best) {
                *x = c + sigma * (*x - c);
            }
            values[k] = eval(&simplex[k], &mut evaluations);
        }
    }
    let b = (0..=n)
        .min_by(|&a, &c| values[a].total_cmp(&values[c]))
        .unwrap_or(0);
    Run {
        x: simplex.swap_remove(b),
        value: values[b],
        iterations,
        evaluations,
        converged,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrentResult {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Brent's parabolic/golden-section minimizer on `[a, b]`.
pub fn brent_minimize<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_iter: usize,
) -> BrentResult {
    const GOLDEN: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = if a < b { (a, b) } else { (b, a) };
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let m = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-14;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            (v, fv) = (w, fw);
            (w, fw) = (x, fx);
            (x, fx) = (u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv) = (w, fw);
                (w, fw) = (u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    BrentResult {
        x,
        value: fx,
        iterations,
    }
}
