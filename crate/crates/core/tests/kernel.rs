//! Kernel identities and the statistics of sampled fBM paths.

use fbm_ldp::fbm::{
    chunk_rng, covariance, sample_paths, unit_kernel_square_integral, CholeskySampler,
    DaviesHarteSampler,
};
use fbm_ldp::stats::Moments;
use fbm_ldp::{Hurst, KernelGrid, TimeGrid};
use nalgebra::DMatrix;

const HURSTS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

fn grid(h: f64, n: usize) -> KernelGrid {
    KernelGrid::build(Hurst::new(h).unwrap(), TimeGrid::unit(n).unwrap()).unwrap()
}

fn within(est: &Moments, target: f64, k: f64) -> bool {
    (est.mean - target).abs() <= k * est.std_error()
}

#[test]
fn kernel_square_integrates_to_unit_variance() {
    for h in HURSTS {
        let v = unit_kernel_square_integral(Hurst::new(h).unwrap());
        assert!((v - 1.0).abs() < 1e-3, "H={h}: {v}");
    }
}

#[test]
fn covariance_matrix_is_psd_with_exact_diagonal() {
    for h in HURSTS {
        let kg = grid(h, 100);
        let cov = kg.cov_fbm();
        let n = cov.len();
        for (i, row) in cov.iter().enumerate() {
            let t = kg.grid().node(i);
            assert!((row[i] - t.powf(2.0 * h)).abs() <= 1e-10);
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, cov[j][i]);
            }
        }
        let m = DMatrix::from_fn(n, n, |a, b| cov[a][b]);
        let norm = m.norm();
        let min = m.symmetric_eigenvalues().min();
        assert!(min >= -1e-10 * norm, "H={h}: {min}");
    }
}

#[test]
fn rescaled_weights_reproduce_variance_exactly() {
    for h in HURSTS {
        let kg = grid(h, 100);
        for i in 1..=100 {
            let t = kg.grid().node(i);
            assert!((kg.row_variance(i) / t.powf(2.0 * h) - 1.0).abs() < 1e-12);
        }
    }
}

/// Cell-averaging loses variance where the kernel is singular, so the raw
/// weights undershoot `t^{2H}` by more than this tolerance away from `H = ½`.
#[test]
#[ignore = "raw cell-averaged weights miss t^{2H} by 0.3%-14% for H != 1/2"]
fn raw_weights_reproduce_variance_within_tolerance() {
    for h in HURSTS {
        let kg = grid(h, 200);
        let v = kg.raw_row_variance(200);
        assert!((v - 1.0).abs() < 1e-3, "H={h}: {v}");
    }
}

#[test]
fn sampled_variance_is_self_similar() {
    for h in HURSTS {
        let kg = grid(h, 100);
        let checkpoints = [25, 50, 75, 100];
        let mut m = [Moments::default(); 4];
        for s in sample_paths(&kg, 100_000, 11, false) {
            for (acc, &i) in m.iter_mut().zip(&checkpoints) {
                acc.push(s.fbm_path[i].powi(2));
            }
        }
        for (acc, &i) in m.iter().zip(&checkpoints) {
            let target = kg.grid().node(i).powf(2.0 * h);
            assert!(
                within(acc, target, 3.0),
                "H={h} t={}: {} vs {target}",
                kg.grid().node(i),
                acc.mean
            );
        }
    }
}

#[test]
fn sampled_correlation_and_cross_covariance() {
    let h = 0.25;
    let kg = grid(h, 100);
    let hurst = Hurst::new(h).unwrap();
    let (mut cross, mut half, mut one, mut prod) = (
        Moments::default(),
        Moments::default(),
        Moments::default(),
        Moments::default(),
    );
    let mut incr = Moments::default();
    for s in sample_paths(&kg, 100_000, 5, false) {
        let w1: f64 = s.bm_increments.iter().sum();
        let (a, b) = (s.fbm_path[50], s.fbm_path[100]);
        cross.push(w1 * b);
        half.push(a * a);
        one.push(b * b);
        prod.push(a * b);
        incr.push((b - a).powi(2));
    }
    assert!(
        within(&cross, kg.cov_cross()[100][100], 3.0),
        "cross {}",
        cross.mean
    );
    assert!(
        within(&prod, covariance(hurst, 0.5, 1.0).unwrap(), 3.0),
        "cov {}",
        prod.mean
    );
    let corr = prod.mean / (half.mean * one.mean).sqrt();
    let target = covariance(hurst, 0.5, 1.0).unwrap() / 0.5f64.powf(2.0 * h).sqrt();
    let se = (1.0 - target * target) / (100_000f64).sqrt();
    assert!((corr - target).abs() <= 3.0 * se, "corr {corr} vs {target}");
    assert!(
        within(&incr, 0.5f64.powf(2.0 * h), 3.0),
        "increment {}",
        incr.mean
    );
}

#[test]
fn brownian_paths_are_running_sums() {
    let kg = grid(0.5, 64);
    for s in sample_paths(&kg, 50, 3, true) {
        let mut acc = 0.0;
        for (i, db) in s.bm_increments.iter().enumerate() {
            acc += db;
            assert_eq!(s.fbm_path[i + 1], acc);
        }
        assert!(s.independent_bm_increments.is_some());
    }
}

#[test]
fn alternative_samplers_agree_on_marginals() {
    let h = 0.25;
    let kg = grid(h, 64);
    let chol = CholeskySampler::new(&kg).unwrap();
    let dh = DaviesHarteSampler::new(Hurst::new(h).unwrap(), 64).unwrap();
    let mut rng = chunk_rng(17, 0);
    let (mut c, mut d, mut dh_mid) = (Moments::default(), Moments::default(), Moments::default());
    for _ in 0..20_000 {
        let p = chol.sample(&mut rng);
        c.push(p[64].powi(2));
        let (a, b) = dh.sample_pair(&mut rng);
        d.push(a[64].powi(2));
        d.push(b[64].powi(2));
        dh_mid.push((a[32] * a[64] + b[32] * b[64]) / 2.0);
    }
    assert!(within(&c, 1.0, 3.0), "cholesky {}", c.mean);
    assert!(within(&d, 1.0, 3.0), "circulant {}", d.mean);
    let target = covariance(Hurst::new(h).unwrap(), 0.5, 1.0).unwrap();
    assert!(
        within(&dh_mid, target, 3.0),
        "circulant cov {}",
        dh_mid.mean
    );
}
