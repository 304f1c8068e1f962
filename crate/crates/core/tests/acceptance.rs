//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use aerosurf::config::SystemConfig;
use aerosurf::experiments::*;
use aerosurf::optimizer::{solve, OptimizationResult, SolverOptions, SurfaceMode};
use common::{centre, oracle, scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MONOTONE_SLACK: f64 = 1e-8;
const WMMSE_GAP: f64 = 1e-9;
const STABLE_CHANGE: f64 = 1e-3;
const STABLE_WITHIN: usize = 50;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// First outer iteration after which every consecutive relative change of
/// `series` stays below `tol`.
fn settles_at(series: &[f64], tol: f64) -> usize {
    let mut last_big = 0;
    for (i, w) in series.windows(2).enumerate() {
        if (w[1] - w[0]).abs() > tol * w[0].abs().max(1e-12) {
            last_big = i + 1;
        }
    }
    last_big + 1
}

/// The 50 seeded STAR instances at the centre placement shared by the
/// convergence, identity and residual criteria.
fn centre_instances() -> Vec<(f64, OptimizationResult)> {
    let cfg = SystemConfig::default();
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..50u64)
        .map(|seed| {
            let eta = rng.random_range(0.0..FRAC_PI_2);
            let ch = scenario(&cfg, centre(), SurfaceMode::Star, eta, 1000 + seed);
            (eta, solve(&cfg, &ch, SurfaceMode::Star, &opts, seed).unwrap())
        })
        .collect()
}

fn monotone_convergence(results: &[(f64, OptimizationResult)], elapsed: Duration) -> Outcome {
    let worst_increase = results.iter().map(|(_, r)| r.diagnostics.max_block_increase).fold(0.0, f64::max);
    let settle = results
        .iter()
        .map(|(_, r)| {
            let series: Vec<f64> = r.trace.iter().map(|t| t.feasible_sum_rate).collect();
            settles_at(&series, STABLE_CHANGE)
        })
        .max()
        .unwrap();
    let pass = worst_increase <= MONOTONE_SLACK && settle <= STABLE_WITHIN && elapsed < Duration::from_secs(120);
    outcome(
        pass,
        format!(
            "50 instances, worst relative block increase {worst_increase:.1e}, sum-rate trace settles by outer iteration {settle}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn wmmse_identity(results: &[(f64, OptimizationResult)]) -> Outcome {
    let gap = results.iter().map(|(_, r)| r.diagnostics.max_wmmse_gap).fold(0.0, f64::max);
    outcome(gap <= WMMSE_GAP, format!("worst |sum log2 w - sum rate| {gap:.1e}"))
}

fn exit_residuals(results: &[(f64, OptimizationResult)]) -> Outcome {
    let star = results.iter().map(|(_, r)| &r.residuals);
    let slack = star.clone().map(|r| r.power_slack).fold(f64::INFINITY, f64::min);
    let split = star.clone().map(|r| r.energy_split).fold(0.0, f64::max);
    let coupling = star.map(|r| r.coupling).fold(0.0, f64::max);
    let cfg = SystemConfig::default();
    let mut modulus = 0.0f64;
    let mut ris_slack = f64::INFINITY;
    for seed in 0..20u64 {
        let ch = scenario(&cfg, centre(), SurfaceMode::Ris, 0.0, 2000 + seed);
        let r = solve(&cfg, &ch, SurfaceMode::Ris, &SolverOptions::default(), seed).unwrap();
        modulus = modulus.max(r.residuals.modulus);
        ris_slack = ris_slack.min(r.residuals.power_slack);
    }
    let slack = slack.min(ris_slack);
    let pass = slack >= -1e-9 && split <= 1e-6 && coupling <= 1e-4 && modulus <= 1e-9;
    outcome(
        pass,
        format!(
            "min power slack {slack:.2e} mW, energy split {split:.1e}, coupling {coupling:.1e}, RIS modulus {modulus:.1e}"
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let amplitude = oracle::amplitude_gap(100);
    let phase = oracle::phase_gap(100);
    let precoder = oracle::precoder_gap(100);
    let surface = oracle::surface_gap(100);
    let elapsed = start.elapsed();
    let pass = amplitude <= 1e-6
        && phase <= 1e-6
        && precoder <= 1e-4
        && surface <= 1e-10
        && elapsed < Duration::from_secs(300);
    outcome(
        pass,
        format!(
            "100 instances each: amplitude {amplitude:.1e}, phase {phase:.1e}, precoder {precoder:.1e} rel, surface {surface:.1e} rel, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn channel_statistics() -> Outcome {
    let directivity = oracle::directivity_gap(&[0.0, 1.0, 3.0, 7.0, 20.0]);
    let power = oracle::rician_power_gap(&[0.0, 1.0, 10.0], 10_000);
    outcome(
        directivity < 1e-3 && power <= 0.05,
        format!("directivity gap {directivity:.1e}, Rician power deviation {:.2}%", power * 100.0),
    )
}

fn mean_rate(summary: &[SummaryRow], placement: usize, altitude: f64, arch: SurfaceMode, eta: Option<f64>) -> f64 {
    summary
        .iter()
        .find(|s| s.placement_index == placement && s.altitude == altitude && s.architecture == arch && s.eta == eta)
        .map(|s| s.mean_sum_rate)
        .unwrap()
}

fn low_altitude_grid() -> Outcome {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::default();
    cfg.placement.altitudes = vec![10.0];
    let summary = summarize(&run_position_grid(&cfg));
    let points = cfg.placement.grid_points(&cfg.region).len();
    let wins = (0..points)
        .filter(|&p| mean_rate(&summary, p, 10.0, SurfaceMode::Star, Some(0.0)) > mean_rate(&summary, p, 10.0, SurfaceMode::Ris, None))
        .count();
    let elapsed = start.elapsed();
    let pass = wins * 5 >= points * 4 && elapsed < Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "H=10 m, {} trials: STAR ahead at {wins}/{points} grid points, {:.1}s",
            cfg.trials,
            elapsed.as_secs_f64()
        ),
    )
}

fn altitude_trend() -> Outcome {
    let mut cfg = ExperimentConfig::default();
    cfg.placement.positions = vec![[10.0, 10.0], [80.0, 20.0]];
    cfg.placement.altitudes = vec![10.0, 40.0];
    cfg.placement.etas = vec![0.0];
    let summary = summarize(&run_altitude_orientation_sweep(&cfg));
    let ris_near = mean_rate(&summary, 0, 40.0, SurfaceMode::Ris, None);
    let star_near = mean_rate(&summary, 0, 40.0, SurfaceMode::Star, Some(0.0));
    let star_far = mean_rate(&summary, 1, 10.0, SurfaceMode::Star, Some(0.0));
    let ris_far = mean_rate(&summary, 1, 10.0, SurfaceMode::Ris, None);
    outcome(
        ris_near > star_near && star_far > ris_far,
        format!(
            "{} trials: (10,10,40) RIS {ris_near:.2} vs STAR {star_near:.2}; (80,20,10) STAR {star_far:.2} vs RIS {ris_far:.2}",
            cfg.trials
        ),
    )
}

fn orientation_trend() -> Outcome {
    let mut cfg = ExperimentConfig {
        trials: 200,
        ..Default::default()
    };
    cfg.architectures = vec![SurfaceMode::Star];
    cfg.placement.etas = vec![0.0, FRAC_PI_4, FRAC_PI_2];
    let summary = summarize(&run_altitude_orientation_sweep(&cfg));
    let means: Vec<f64> = cfg
        .placement
        .etas
        .iter()
        .map(|&eta| mean_rate(&summary, 0, 40.0, SurfaceMode::Star, Some(eta)))
        .collect();
    outcome(
        means[1] > means[0] && means[1] > means[2],
        format!(
            "{} trials, master seed {}: eta=0 {:.2}, eta=pi/4 {:.2}, eta=pi/2 {:.2}",
            cfg.trials, cfg.master_seed, means[0], means[1], means[2]
        ),
    )
}

fn directory_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn reproducibility() -> Outcome {
    let mut cfg = ExperimentConfig {
        trials: 3,
        master_seed: 77,
        ..Default::default()
    };
    cfg.placement.grid = [2, 2];
    cfg.placement.altitudes = vec![10.0, 40.0];
    cfg.placement.etas = vec![0.0, FRAC_PI_4];
    let root = tempfile::tempdir().unwrap();
    let max_threads = std::thread::available_parallelism().map_or(8, |n| n.get()).max(8);
    let mut runs = Vec::new();
    for (i, threads) in [1, max_threads, max_threads].into_iter().enumerate() {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let base = root.path().join(format!("run{i}"));
        pool.install(|| {
            let grid = run_position_grid(&cfg);
            persist_results(&base.join("grid"), "grid", &cfg, &grid, &summarize(&grid), None).unwrap();
            let sweep = run_altitude_orientation_sweep(&cfg);
            persist_results(&base.join("sweep"), "sweep", &cfg, &sweep, &summarize(&sweep), None).unwrap();
            let (conv, trace) = run_convergence(&cfg);
            persist_results(&base.join("converge"), "converge", &cfg, &conv, &summarize(&conv), Some(&trace)).unwrap();
        });
        let bytes: Vec<_> = ["grid", "sweep", "converge"].iter().map(|d| directory_bytes(&base.join(d))).collect();
        runs.push(bytes);
    }
    let files: usize = runs[0].iter().map(Vec::len).sum();
    let identical = runs.iter().all(|r| r == &runs[0]);
    outcome(
        identical,
        format!("{files} files identical across 1 and {max_threads} worker threads and a repeat"),
    )
}

fn main() {
    let start = Instant::now();
    let instances = centre_instances();
    let elapsed = start.elapsed();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("monotone convergence", Box::new(|| monotone_convergence(&instances, elapsed))),
        ("WMMSE identity", Box::new(|| wmmse_identity(&instances))),
        ("constraint residuals at exit", Box::new(|| exit_residuals(&instances))),
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("channel statistics", Box::new(channel_statistics)),
        ("STAR ahead at low altitude", Box::new(low_altitude_grid)),
        ("altitude trend near and far from the BS", Box::new(altitude_trend)),
        ("orientation pi/4 best", Box::new(orientation_trend)),
        ("byte-identical reruns", Box::new(reproducibility)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {} {name}: {} ({})", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
