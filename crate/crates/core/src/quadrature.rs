//! Gauss–Legendre rules and endpoint-singular integration helpers.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds an `n`-point rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Integrates over `[0, 1]` after the power substitution `y -> y^p`, which
    /// maps an integrable `r^(1/p - 1)` singularity at zero to a bounded integrand.
    fn integrate_power_substituted<F: FnMut(f64) -> f64>(&self, p: f64, mut f: F) -> f64 {
        self.integrate(0.0, 1.0, |y| {
            if y <= 0.0 {
                return 0.0;
            }
            p * y.powf(p - 1.0) * f(y.powf(p))
        })
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

macro_rules! cached_rule {
    ($name:ident, $n:expr) => {
        pub fn $name() -> &'static GaussLegendre {
            static RULE: OnceLock<GaussLegendre> = OnceLock::new();
            RULE.get_or_init(|| GaussLegendre::new($n))
        }
    };
}

cached_rule!(gl16, 16);
cached_rule!(gl32, 32);
cached_rule!(gl64, 64);

/// `∫_a^b f(r) dr` for an integrand behaving like `(r - a)^alpha` near `a`,
/// with `alpha > -1`.
pub fn integrate_left_singular<F: FnMut(f64) -> f64>(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    alpha: f64,
    mut f: F,
) -> f64 {
    let len = b - a;
    let p = 1.0 / (1.0 + alpha);
    len * rule.integrate_power_substituted(p, |y| f(a + len * y))
}

/// `∫_a^b f(r) dr` for an integrand behaving like `(b - r)^alpha` near `b`.
pub fn integrate_right_singular<F: FnMut(f64) -> f64>(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    alpha: f64,
    mut f: F,
) -> f64 {
    let len = b - a;
    let p = 1.0 / (1.0 + alpha);
    len * rule.integrate_power_substituted(p, |y| f(b - len * y))
}

/// Composite trapezoid rule on uniformly spaced samples.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            dx * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 16, 64] {
            let rule = GaussLegendre::new(n);
            let s: f64 = rule.weights().iter().sum();
            assert_relative_eq!(s, 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let rule = GaussLegendre::new(8);
        // ∫_0^2 x^15 dx = 2^16 / 16
        let v = rule.integrate(0.0, 2.0, |x| x.powi(15));
        assert_relative_eq!(v, 4096.0, max_relative = 1e-13);
    }

    #[test]
    fn left_singularity_is_removed() {
        // ∫_0^1 r^{-3/4} dr = 4
        let v = integrate_left_singular(gl32(), 0.0, 1.0, -0.75, |r| r.powf(-0.75));
        assert_relative_eq!(v, 4.0, max_relative = 1e-12);
        // ∫_0^1 r^{-1/4} cos r dr, reference from series Σ (-1)^k / ((2k)! (2k + 3/4))
        let mut reference = 0.0;
        let mut fact = 1.0;
        for k in 0..12 {
            if k > 0 {
                fact *= (2 * k - 1) as f64 * (2 * k) as f64;
            }
            reference += (-1f64).powi(k) / (fact * (2.0 * k as f64 + 0.75));
        }
        let v = integrate_left_singular(gl32(), 0.0, 1.0, -0.25, |r| r.powf(-0.25) * r.cos());
        assert_relative_eq!(v, reference, max_relative = 1e-12);
    }

    #[test]
    fn right_singularity_is_removed() {
        // ∫_0^2 (2 - r)^{-1/2} dr = 2 sqrt(2)
        let v = integrate_right_singular(gl16(), 0.0, 2.0, -0.5, |r| (2.0 - r).powf(-0.5));
        assert_relative_eq!(v, 2.0 * 2f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn trapezoid_exact_for_linear() {
        let xs: Vec<f64> = (0..=10).map(|i| 3.0 * i as f64 / 10.0 + 1.0).collect();
        assert_relative_eq!(trapezoid(&xs, 0.1), 2.5, max_relative = 1e-14);
    }
}
