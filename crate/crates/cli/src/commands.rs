//! Subcommand bodies. Each returns the full output text so the caller decides
//! where it goes.

use std::fmt::Write as _;

use fbm_ldp::benchmarks::{self, BenchmarkRow};
use fbm_ldp::fbm::sample_paths;
use fbm_ldp::largetime::{CevSpec, JRate, LargeTimeRate};
use fbm_ldp::mc::{mc_digital_prob, mc_implied_vols, ModelSpec};
use fbm_ldp::optim::SimplexOptions;
use fbm_ldp::rate::{RateOptions, RateSolver};
use fbm_ldp::smile::asymptotic_smile;
use fbm_ldp::{KernelGrid, TimeGrid};
use serde::Serialize;

use crate::config::{Format, LargeTimeKind, Settings};
use crate::CliError;

const LDP_PATHS: usize = 200_000;
const DUMP_PATHS: usize = 1_000;
const J_GRID: usize = 400;

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn solver(s: &Settings) -> Result<RateSolver, CliError> {
    let kg = KernelGrid::build(s.hurst()?, TimeGrid::unit(s.grid())?)?;
    Ok(RateSolver::new(
        &kg,
        s.vol()?,
        s.modes(),
        RateOptions::default(),
    )?)
}

fn model(s: &Settings) -> Result<ModelSpec, CliError> {
    Ok(ModelSpec::new(s.vol()?, s.hurst()?, s.rho())?)
}

pub fn smile(s: &Settings) -> Result<String, CliError> {
    let mut curve = asymptotic_smile(&solver(s)?, s.rho(), &s.xs())?;
    if s.refine.unwrap_or(false) {
        curve = curve.second_order(s.maturity_or(benchmarks::MATURITY))?;
    }
    match s.format() {
        Format::Csv => Ok(curve.to_csv()),
        Format::Json => to_json(&curve),
    }
}

pub fn mc(s: &Settings) -> Result<String, CliError> {
    let vols = mc_implied_vols(
        &model(s)?,
        s.maturity_or(benchmarks::MATURITY),
        &s.xs(),
        s.paths_or(benchmarks::MC_PATHS),
        s.steps(),
        s.seed(),
    )?;
    match s.format() {
        Format::Csv => {
            let mut out =
                String::from("x,strike,price,price_std_error,implied_vol,vol_std_error\n");
            for v in &vols {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    v.x, v.strike, v.price.mean, v.price.std_error, v.implied_vol, v.vol_std_error
                );
            }
            Ok(out)
        }
        Format::Json => to_json(&vols),
    }
}

#[derive(Serialize)]
struct LdpRow {
    t: f64,
    probability: f64,
    probability_std_error: f64,
    scaled_log_probability: f64,
    lambda_star: f64,
    gap: f64,
}

pub fn ldp_check(s: &Settings) -> Result<String, CliError> {
    let x = s.x.unwrap_or(0.1);
    let ts = s.ts.clone().unwrap_or_else(|| vec![0.01, 0.005, 0.002]);
    let lambda_star = solver(s)?.lambda_star(x, s.rho())?;
    let m = model(s)?;
    let two_h = 2.0 * m.hurst.value();
    let rows = ts
        .iter()
        .map(|&t| {
            let p = mc_digital_prob(&m, t, x, s.paths_or(LDP_PATHS), s.steps(), s.seed())?;
            let scaled = -t.powf(two_h) * p.mean.ln();
            Ok(LdpRow {
                t,
                probability: p.mean,
                probability_std_error: p.std_error,
                scaled_log_probability: scaled,
                lambda_star,
                gap: (scaled - lambda_star).abs(),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    match s.format() {
        Format::Csv => {
            let mut out = String::from(
                "t,probability,probability_std_error,scaled_log_probability,lambda_star,gap\n",
            );
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.t,
                    r.probability,
                    r.probability_std_error,
                    r.scaled_log_probability,
                    r.lambda_star,
                    r.gap
                );
            }
            Ok(out)
        }
        Format::Json => to_json(&rows),
    }
}

#[derive(Serialize)]
struct RatePoint {
    s: f64,
    rate: f64,
}

#[derive(Serialize)]
struct RateCurve {
    model: LargeTimeRate,
    points: Vec<RatePoint>,
}

pub fn largetime(s: &Settings) -> Result<String, CliError> {
    let spec = CevSpec::new(s.beta.unwrap_or(0.5), s.sigma.unwrap_or(1.0))?;
    let rate = match s.kind.unwrap_or(LargeTimeKind::Cev) {
        LargeTimeKind::Cev => LargeTimeRate::cev(spec, s.q.unwrap_or(1.5 * spec.nu()))?,
        LargeTimeKind::FractionalCev => {
            let kg = KernelGrid::build(s.hurst()?, TimeGrid::unit(J_GRID)?)?;
            let j = JRate::solve(
                &kg,
                s.p.unwrap_or(1.0),
                s.modes(),
                &SimplexOptions::default(),
            )?;
            LargeTimeRate::fractional_cev(spec, j)?
        }
    };
    let n = s.points.unwrap_or(31);
    if n < 2 {
        return Err(CliError::Config("points must be at least 2".into()));
    }
    let s_max = s.s_max.unwrap_or(3.0);
    if !s_max.is_finite() || s_max <= 0.0 {
        return Err(CliError::Config("s-max must be positive".into()));
    }
    let points = (0..n)
        .map(|i| {
            let x = s_max * i as f64 / (n - 1) as f64;
            RatePoint {
                s: x,
                rate: rate.rate(x),
            }
        })
        .collect::<Vec<_>>();
    match s.format() {
        Format::Csv => {
            let mut out = String::from("s,rate\n");
            for p in &points {
                let _ = writeln!(out, "{},{}", p.s, p.rate);
            }
            Ok(out)
        }
        Format::Json => to_json(&RateCurve {
            model: rate,
            points,
        }),
    }
}

#[derive(Serialize)]
struct PathDump {
    hurst: f64,
    horizon: f64,
    seed: u64,
    nodes: Vec<f64>,
    paths: Vec<Vec<f64>>,
}

pub fn simulate_fbm(s: &Settings) -> Result<String, CliError> {
    let grid = TimeGrid::new(s.steps(), s.maturity_or(1.0))?;
    let kg = KernelGrid::build(s.hurst()?, grid)?;
    let paths: Vec<Vec<f64>> = sample_paths(&kg, s.paths_or(DUMP_PATHS), s.seed(), false)
        .map(|p| p.fbm_path)
        .collect();
    let nodes = kg.grid().nodes();
    match s.format() {
        Format::Csv => {
            let mut out = String::from("path");
            for t in &nodes {
                let _ = write!(out, ",{t}");
            }
            out.push('\n');
            for (i, p) in paths.iter().enumerate() {
                let _ = write!(out, "{i}");
                for v in p {
                    let _ = write!(out, ",{v}");
                }
                out.push('\n');
            }
            Ok(out)
        }
        Format::Json => to_json(&PathDump {
            hurst: kg.hurst().value(),
            horizon: kg.grid().horizon(),
            seed: s.seed(),
            nodes,
            paths,
        }),
    }
}

#[derive(Serialize)]
struct TableRow {
    table: u8,
    rho: f64,
    x: f64,
    ritz: f64,
    ritz_published: f64,
    mc: f64,
    mc_std_error: f64,
    mc_published: f64,
}

pub fn reproduce_tables(s: &Settings) -> Result<String, CliError> {
    let solver = solver(s)?;
    let t = s.maturity_or(benchmarks::MATURITY);
    let mut rows = Vec::new();
    let tables: [(u8, f64, &[BenchmarkRow]); 2] = [
        (1, benchmarks::RHO_UNCORRELATED, &benchmarks::UNCORRELATED),
        (2, benchmarks::RHO_CORRELATED, &benchmarks::CORRELATED),
    ];
    for (id, rho, bench) in tables {
        let xs: Vec<f64> = bench.iter().map(|r| r.x).collect();
        let curve = asymptotic_smile(&solver, rho, &xs)?;
        let m = ModelSpec::new(s.vol()?, s.hurst()?, rho)?;
        let mc = mc_implied_vols(
            &m,
            t,
            &xs,
            s.paths_or(benchmarks::MC_PATHS),
            s.steps(),
            s.seed(),
        )?;
        for ((p, v), b) in curve.points.iter().zip(&mc).zip(bench) {
            rows.push(TableRow {
                table: id,
                rho,
                x: b.x,
                ritz: 100.0 * p.sigma0,
                ritz_published: b.ritz,
                mc: 100.0 * v.implied_vol,
                mc_std_error: 100.0 * v.vol_std_error,
                mc_published: b.mc,
            });
        }
    }
    match s.format() {
        Format::Csv => {
            let mut out =
                String::from("table,rho,x,ritz,ritz_published,mc,mc_std_error,mc_published\n");
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.table,
                    r.rho,
                    r.x,
                    r.ritz,
                    r.ritz_published,
                    r.mc,
                    r.mc_std_error,
                    r.mc_published
                );
            }
            Ok(out)
        }
        Format::Json => to_json(&rows),
    }
}
