//! End-to-end runs of the `fbm-ldp` binary.

use std::path::Path;
use std::process::{Command, Output};

use fbm_ldp::benchmarks;
use fbm_ldp::largetime::{cev_rate, CevSpec};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbm-ldp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Parses a CSV body into a header and numeric rows.
fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn default_smile_matches_reference_table() {
    let (header, rows) = parse_csv(&stdout(&["smile"]));
    let c = column(&header, "sigma0");
    assert_eq!(rows.len(), benchmarks::UNCORRELATED.len());
    for (row, b) in rows.iter().zip(&benchmarks::UNCORRELATED) {
        assert!(
            (100.0 * row[c] - b.ritz).abs() <= benchmarks::RITZ_TOLERANCE,
            "x={}",
            b.x
        );
    }
}

#[test]
fn constant_vol_smile_is_flat() {
    let (header, rows) = parse_csv(&stdout(&[
        "smile",
        "--vol",
        "const:0.2",
        "--xs",
        "-0.1,0.05,0.2",
    ]));
    let c = column(&header, "sigma0");
    assert!(rows.iter().all(|r| (r[c] - 0.2).abs() < 1e-12));
}

#[test]
fn malformed_vol_is_a_config_error() {
    let out = run(&["smile", "--vol", "tanh:0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tanh:0.1"));
}

#[test]
fn unknown_flags_are_rejected_and_help_lists_flags() {
    assert_eq!(run(&["smile", "--bogus"]).status.code(), Some(2));
    let help = stdout(&["mc", "--help"]);
    for flag in [
        "--hurst",
        "--rho",
        "--vol",
        "--modes",
        "--paths",
        "--steps",
        "--maturity",
        "--seed",
        "--out",
        "--format",
        "--threads",
        "--config",
    ] {
        assert!(help.contains(flag), "missing {flag}");
    }
}

#[test]
fn expansion_outside_its_domain_is_a_numerical_failure() {
    let out = run(&["smile", "--refine", "--maturity", "0.01", "--xs", "0.05"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mc_output_is_reproducible_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<_> = ["a.csv", "b.csv", "c.csv"]
        .iter()
        .map(|f| dir.path().join(f))
        .collect();
    let base = ["mc", "--paths", "20000", "--steps", "50", "--rho=-0.1"];
    for (file, threads) in files.iter().zip(["1", "1", "2"]) {
        let mut args = base.to_vec();
        let out = file.to_str().unwrap();
        args.extend(["--out", out, "--threads", threads]);
        assert!(run(&args).status.success());
    }
    let read = |p: &Path| std::fs::read(p).unwrap();
    assert_eq!(read(&files[0]), read(&files[1]));
    assert_eq!(read(&files[0]), read(&files[2]));
}

#[test]
fn mc_json_has_no_timing_fields() {
    let text = stdout(&[
        "mc", "--paths", "5000", "--steps", "20", "--xs", "0.05", "--format", "json",
    ]);
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value.as_array().unwrap().len(), 1);
    assert!(!text.contains("wall_time"));
}

#[test]
fn ldp_check_gap_shrinks() {
    let (header, rows) = parse_csv(&stdout(&["ldp-check", "--paths", "50000"]));
    let g = column(&header, "gap");
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[1][g] < w[0][g]));
}

#[test]
fn largetime_curve_is_the_cev_rate() {
    let (header, rows) = parse_csv(&stdout(&["largetime", "--beta", "0.5", "--points", "11"]));
    let (s, r) = (column(&header, "s"), column(&header, "rate"));
    let spec = CevSpec::new(0.5, 1.0).unwrap();
    assert_eq!(rows.len(), 11);
    for row in rows {
        assert_eq!(row[r], cev_rate(&spec, row[s]));
    }
}

#[test]
fn fractional_largetime_curve_increases() {
    let (header, rows) = parse_csv(&stdout(&[
        "largetime",
        "--kind",
        "fractional-cev",
        "--points",
        "5",
        "--modes",
        "2",
    ]));
    let r = column(&header, "rate");
    assert_eq!(rows[0][r], 0.0);
    assert!(rows.windows(2).all(|w| w[1][r] > w[0][r]));
}

#[test]
fn brownian_dump_has_gaussian_increments() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("paths.csv");
    let out = run(&[
        "simulate-fbm",
        "--hurst",
        "0.5",
        "--paths",
        "10000",
        "--steps",
        "100",
        "--out",
        file.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let (header, rows) = parse_csv(&std::fs::read_to_string(&file).unwrap());
    assert_eq!(header.len(), 102);
    let incs: Vec<f64> = rows
        .iter()
        .flat_map(|r| r[1..].windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>())
        .collect();
    assert_eq!(incs.len(), 1_000_000);
    let n = incs.len() as f64;
    let mean = incs.iter().sum::<f64>() / n;
    let var = incs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let skew = incs.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n / var.powf(1.5);
    assert!(skew.abs() < 0.05, "skew {skew}");
    assert!((var / 0.01 - 1.0).abs() < 0.01, "var {var}");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"vol": "const:0.3", "xs": [0.02, 0.04], "format": "json"}"#,
    )
    .unwrap();
    let text = stdout(&[
        "smile",
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    let (header, rows) = parse_csv(&text);
    let c = column(&header, "sigma0");
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| (r[c] - 0.3).abs() < 1e-12));

    std::fs::write(&cfg, r#"{"hurts": 0.3}"#).unwrap();
    assert_eq!(
        run(&["smile", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["smile", "--config", "/nonexistent/run.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["smile", "--hurst", "1.5"]).status.code(), Some(2));
}

#[test]
fn reproduce_tables_reports_both_tables() {
    let (header, rows) = parse_csv(&stdout(&["reproduce-tables", "--paths", "50000"]));
    assert_eq!(rows.len(), 14);
    let (ritz, published) = (column(&header, "ritz"), column(&header, "ritz_published"));
    assert!(rows
        .iter()
        .all(|r| (r[ritz] - r[published]).abs() <= benchmarks::RITZ_TOLERANCE));
}
