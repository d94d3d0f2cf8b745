//! Monte Carlo engine against closed forms, the variational rate and its own
//! reproducibility guarantees.

use fbm_ldp::benchmarks;
use fbm_ldp::mc::{
    mc_call_price, mc_call_price_plain, mc_call_prices, mc_digital_prob, mc_exponential_functional,
    mc_implied_vols, mc_martingale_check, ModelSpec,
};
use fbm_ldp::rate::{RateOptions, RateSolver, VolFunction};
use fbm_ldp::smile::{bs_call, implied_vol};
use fbm_ldp::stats::ks_two_sample;
use fbm_ldp::{Hurst, KernelGrid, TimeGrid};

fn tanh(rho: f64) -> ModelSpec {
    ModelSpec::new(VolFunction::paper_tanh(), Hurst::new(0.25).unwrap(), rho).unwrap()
}

#[test]
fn flat_vol_implied_vols_recover_sigma_for_any_hurst() {
    for h in [0.1, 0.25, 0.75] {
        let m = ModelSpec::new(
            VolFunction::Const { sigma: 0.2 },
            Hurst::new(h).unwrap(),
            -0.5,
        )
        .unwrap();
        for v in mc_implied_vols(&m, 0.05, &[-0.1, 0.0, 0.1], 50_000, 50, 9).unwrap() {
            assert!(
                (v.implied_vol - 0.2).abs() <= 3.0 * v.vol_std_error.max(1e-12),
                "H={h} x={}: {} ± {}",
                v.x,
                v.implied_vol,
                v.vol_std_error
            );
        }
    }
}

#[test]
fn flat_vol_price_matches_black_scholes() {
    let m = ModelSpec::new(
        VolFunction::Const { sigma: 0.3 },
        Hurst::new(0.1).unwrap(),
        0.4,
    )
    .unwrap();
    let est = mc_call_price_plain(&m, 0.5, 1.05, 200_000, 20, 4).unwrap();
    let exact = bs_call(1.0, 1.05, 0.5, 0.3);
    assert!((est.mean - exact).abs() <= 3.0 * est.std_error);
}

#[test]
fn martingale_property_holds() {
    for t in [0.005, 1.0] {
        let est = mc_martingale_check(&tanh(-0.1), t, 100_000, 100, 21).unwrap();
        assert!(
            (est.mean - 1.0).abs() <= 3.0 * est.std_error,
            "t={t}: {}",
            est.mean
        );
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                mc_call_prices(&tanh(-0.1), 0.005, &[0.98, 1.0, 1.03], 20_000, 50, 77).unwrap()
            })
    };
    let (a, b) = (run(1), run(3));
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.mean.to_bits(), y.mean.to_bits());
        assert_eq!(x.std_error.to_bits(), y.std_error.to_bits());
    }
}

#[test]
fn doubling_paths_shrinks_error_by_root_two() {
    let m = tanh(0.0);
    let a = mc_call_price(&m, 0.005, 1.0, 100_000, 50, 1).unwrap();
    let b = mc_call_price(&m, 0.005, 1.0, 200_000, 50, 1).unwrap();
    let ratio = a.std_error / b.std_error;
    assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn conditioning_beats_plain_payoff() {
    let m = tanh(-0.1);
    let strike = (0.05f64 * 0.005f64.powf(0.25)).exp();
    let smooth = mc_call_price(&m, 0.005, strike, 50_000, 50, 8).unwrap();
    let plain = mc_call_price_plain(&m, 0.005, strike, 50_000, 50, 8).unwrap();
    assert!(smooth.std_error < plain.std_error);
    assert!((smooth.mean - plain.mean).abs() <= 3.0 * (smooth.std_error.hypot(plain.std_error)));
}

#[test]
fn table_strikes_agree_with_variational_smile() {
    let kg = KernelGrid::build(
        Hurst::new(benchmarks::HURST).unwrap(),
        TimeGrid::unit(200).unwrap(),
    )
    .unwrap();
    let solver = RateSolver::new(
        &kg,
        VolFunction::paper_tanh(),
        benchmarks::N_MODES,
        RateOptions::default(),
    )
    .unwrap();
    for (rho, rows) in [
        (benchmarks::RHO_UNCORRELATED, &benchmarks::UNCORRELATED[..]),
        (benchmarks::RHO_CORRELATED, &benchmarks::CORRELATED[..]),
    ] {
        let xs: Vec<f64> = rows.iter().map(|r| r.x).collect();
        let mc = mc_implied_vols(
            &tanh(rho),
            benchmarks::MATURITY,
            &xs,
            benchmarks::MC_PATHS,
            benchmarks::MC_STEPS,
            2024,
        )
        .unwrap();
        for (v, r) in mc.iter().zip(rows) {
            let ls = solver.lambda_star(r.x, rho).unwrap();
            let ritz = 100.0 * r.x.abs() / (2.0 * ls).sqrt();
            let vol = 100.0 * v.implied_vol;
            assert!(
                (vol - ritz).abs() <= 0.05,
                "rho={rho} x={}: {vol} vs {ritz}",
                r.x
            );
        }
    }
}

#[test]
fn implied_vol_of_mc_price_inverts() {
    let est = mc_call_price(&tanh(0.0), 0.005, 1.01, 50_000, 50, 3).unwrap();
    let vol = implied_vol(est.mean, 1.0, 1.01, 0.005).unwrap();
    assert!(vol > 0.09 && vol < 0.12);
}

#[test]
fn digital_rate_gap_shrinks_with_maturity() {
    let kg = KernelGrid::build(Hurst::new(0.25).unwrap(), TimeGrid::unit(200).unwrap()).unwrap();
    let solver =
        RateSolver::new(&kg, VolFunction::paper_tanh(), 4, RateOptions::default()).unwrap();
    let x = 0.1;
    let target = solver.lambda_star(x, 0.0).unwrap();
    let gaps: Vec<f64> = [0.01, 0.005, 0.002]
        .iter()
        .map(|&t| {
            let p = mc_digital_prob(&tanh(0.0), t, x, 100_000, 100, 12).unwrap();
            (-t.sqrt() * p.mean.ln() - target).abs()
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn exponential_functional_moves_toward_running_maximum() {
    let h = Hurst::new(0.25).unwrap();
    let ks: Vec<f64> = [10.0, 100.0]
        .iter()
        .map(|&t| {
            let s = mc_exponential_functional(h, t, 0.0, 4_000, 100, 31).unwrap();
            ks_two_sample(&s.statistic, &s.max_reference)
        })
        .collect();
    assert!(ks[1] < ks[0], "{ks:?}");
}

#[test]
fn drift_statistic_is_reported() {
    let s = mc_exponential_functional(Hurst::new(0.5).unwrap(), 10.0, 0.3, 64, 100, 2).unwrap();
    let drift = s.drift_statistic.as_ref().unwrap();
    assert_eq!(drift.len(), 64);
    assert!(drift.iter().all(|v| v.is_finite()));
    assert_eq!(s.statistic.len(), 64);
}
