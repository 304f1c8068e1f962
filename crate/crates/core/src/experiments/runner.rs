//! Job expansion and execution. Jobs run in parallel; results are sorted by
//! their key before anyone sees them, so output never depends on scheduling.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::seeds;
use crate::channel::build_channel_set;
use crate::error::Result;
use crate::geometry::{Position3D, ScenarioGeometry, SurfaceOrientation};
use crate::optimizer::{solve, OptimizationResult, SolveStatus, SurfaceMode, TraceEntry};

/// Horizontal surface position with its index in the experiment's list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePlacement {
    pub index: usize,
    pub x: f64,
    pub y: f64,
}

/// One solve to perform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub placement: SurfacePlacement,
    pub altitude_index: usize,
    pub altitude: f64,
    pub architecture: SurfaceMode,
    /// Index into the orientation list; `None` for the horizontal RIS.
    pub eta_index: Option<usize>,
    pub eta: f64,
    pub trial: usize,
}

/// Sort key shared by jobs and records.
pub type RecordKey = (usize, usize, SurfaceMode, usize, usize);

impl Job {
    pub fn key(&self) -> RecordKey {
        (
            self.placement.index,
            self.altitude_index,
            self.architecture,
            self.eta_index.unwrap_or(0),
            self.trial,
        )
    }

    pub fn surface(&self) -> Position3D {
        Position3D::new(self.placement.x, self.placement.y, self.altitude)
    }

    pub fn orientation(&self) -> SurfaceOrientation {
        match self.architecture {
            SurfaceMode::Ris => SurfaceOrientation::horizontal_ris(),
            SurfaceMode::Star => SurfaceOrientation::vertical_star(self.eta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Converged,
    MaxIterations,
    Failed,
}

/// Outcome of one job. Failed solves keep their indices and seeds, with NaN
/// in every numeric result field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub architecture: SurfaceMode,
    pub placement_index: usize,
    pub x: f64,
    pub y: f64,
    pub altitude_index: usize,
    pub altitude: f64,
    pub eta_index: Option<usize>,
    pub eta: Option<f64>,
    pub trial: usize,
    pub scenario_seed: u64,
    pub seed: u64,
    pub status: RecordStatus,
    pub sum_rate: f64,
    pub user_rates: Vec<f64>,
    pub reflection_users: usize,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub power_slack: f64,
    pub coupling_residual: f64,
    pub energy_split_residual: f64,
    pub modulus_residual: f64,
    pub pdd_violation: f64,
    pub error: Option<String>,
    /// Not persisted: it would make output depend on the machine.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl SweepRecord {
    pub fn key(&self) -> RecordKey {
        (
            self.placement_index,
            self.altitude_index,
            self.architecture,
            self.eta_index.unwrap_or(0),
            self.trial,
        )
    }

    pub fn is_failed(&self) -> bool {
        self.status == RecordStatus::Failed
    }
}

/// User drop for one trial: uniform over the region at the configured height.
pub fn draw_users(cfg: &ExperimentConfig, seed: u64) -> Vec<Position3D> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let r = &cfg.region;
    (0..cfg.system.users)
        .map(|_| {
            let x = rng.random_range(r.x[0]..r.x[1]);
            let y = rng.random_range(r.y[0]..r.y[1]);
            Position3D::new(x, y, r.user_height)
        })
        .collect()
}

fn architecture_code(mode: SurfaceMode) -> u64 {
    match mode {
        SurfaceMode::Ris => 1,
        SurfaceMode::Star => 2,
    }
}

/// `(scenario seed, solver seed)` of a job.
pub fn job_seeds(cfg: &ExperimentConfig, job: &Job) -> (u64, u64) {
    let scenario = seeds::scenario_seed(cfg.master_seed, job.placement.index, job.trial);
    let solver = seeds::solver_seed(
        scenario,
        job.altitude_index,
        architecture_code(job.architecture),
        job.eta_index.unwrap_or(0),
    );
    (scenario, solver)
}

fn execute(cfg: &ExperimentConfig, job: &Job, seed: u64, scenario: u64) -> Result<(OptimizationResult, usize)> {
    let users = draw_users(cfg, seeds::users_seed(cfg.master_seed, scenario, cfg.freeze_users));
    let geom = ScenarioGeometry::new(cfg.bs(), job.surface(), job.orientation(), users)?;
    let channels = build_channel_set(&cfg.system, &geom, scenario)?;
    let reflection = channels
        .sides
        .iter()
        .filter(|s| **s == crate::geometry::Side::Reflection)
        .count();
    Ok((solve(&cfg.system, &channels, job.architecture, &cfg.solver, seed)?, reflection))
}

/// Runs one job and also returns the solver's outer-iteration trace.
pub fn run_job(cfg: &ExperimentConfig, job: &Job) -> (SweepRecord, Vec<TraceEntry>) {
    let (scenario, seed) = job_seeds(cfg, job);
    let start = Instant::now();
    let outcome = execute(cfg, job, seed, scenario);
    let wall_time = start.elapsed();
    let mut record = SweepRecord {
        architecture: job.architecture,
        placement_index: job.placement.index,
        x: job.placement.x,
        y: job.placement.y,
        altitude_index: job.altitude_index,
        altitude: job.altitude,
        eta_index: job.eta_index,
        eta: job.eta_index.map(|_| job.eta),
        trial: job.trial,
        scenario_seed: scenario,
        seed,
        status: RecordStatus::Failed,
        sum_rate: f64::NAN,
        user_rates: vec![f64::NAN; cfg.system.users],
        reflection_users: 0,
        outer_iterations: 0,
        inner_iterations: 0,
        power_slack: f64::NAN,
        coupling_residual: f64::NAN,
        energy_split_residual: f64::NAN,
        modulus_residual: f64::NAN,
        pdd_violation: f64::NAN,
        error: None,
        wall_time,
    };
    match outcome {
        Ok((result, reflection)) => {
            record.status = match result.status {
                SolveStatus::Converged => RecordStatus::Converged,
                SolveStatus::MaxIterations => RecordStatus::MaxIterations,
            };
            record.sum_rate = result.sum_rate;
            record.user_rates = result.user_rates;
            record.reflection_users = reflection;
            record.outer_iterations = result.outer_iterations;
            record.inner_iterations = result.inner_iterations;
            record.power_slack = result.residuals.power_slack;
            record.coupling_residual = result.residuals.coupling;
            record.energy_split_residual = result.residuals.energy_split;
            record.modulus_residual = result.residuals.modulus;
            record.pdd_violation = result.residuals.pdd_violation;
            (record, result.trace)
        }
        Err(e) => {
            log::warn!("job {:?} failed: {e}", job.key());
            record.error = Some(e.to_string());
            (record, Vec::new())
        }
    }
}

/// One solve at `placement`, returned as a record.
pub fn run_single(cfg: &ExperimentConfig, job: &Job) -> SweepRecord {
    run_job(cfg, job).0
}

/// Runs jobs in parallel; output is sorted by record key.
pub fn run_jobs(cfg: &ExperimentConfig, jobs: &[Job]) -> Vec<SweepRecord> {
    let mut records: Vec<SweepRecord> = jobs.par_iter().map(|j| run_single(cfg, j)).collect();
    records.sort_by(|a, b| a.key().cmp(&b.key()));
    records
}

fn placements(points: &[[f64; 2]]) -> Vec<SurfacePlacement> {
    points
        .iter()
        .enumerate()
        .map(|(index, &[x, y])| SurfacePlacement { index, x, y })
        .collect()
}

/// Every (architecture, orientation) pair: RIS once, STAR per orientation.
fn variants(cfg: &ExperimentConfig, etas: &[f64]) -> Vec<(SurfaceMode, Option<usize>, f64)> {
    let mut out = Vec::new();
    for &arch in &cfg.architectures {
        match arch {
            SurfaceMode::Ris => out.push((arch, None, 0.0)),
            SurfaceMode::Star => out.extend(etas.iter().enumerate().map(|(i, &e)| (arch, Some(i), e))),
        }
    }
    out
}

fn expand(
    cfg: &ExperimentConfig,
    placements: &[SurfacePlacement],
    altitudes: &[f64],
    etas: &[f64],
) -> Vec<Job> {
    let variants = variants(cfg, etas);
    let mut jobs = Vec::new();
    for &placement in placements {
        for (altitude_index, &altitude) in altitudes.iter().enumerate() {
            for &(architecture, eta_index, eta) in &variants {
                for trial in 0..cfg.trials {
                    jobs.push(Job {
                        placement,
                        altitude_index,
                        altitude,
                        architecture,
                        eta_index,
                        eta,
                        trial,
                    });
                }
            }
        }
    }
    jobs.sort_by_key(|j| j.key());
    jobs
}

/// Grid cell centres x altitudes x architectures x trials, STAR at the
/// grid orientation.
pub fn position_grid_jobs(cfg: &ExperimentConfig) -> Vec<Job> {
    let points = cfg.placement.grid_points(&cfg.region);
    expand(cfg, &placements(&points), &cfg.placement.altitudes, &[cfg.placement.grid_eta])
}

/// Listed positions x altitudes x (RIS, STAR per orientation) x trials.
pub fn sweep_jobs(cfg: &ExperimentConfig) -> Vec<Job> {
    expand(
        cfg,
        &placements(&cfg.placement.positions),
        &cfg.placement.altitudes,
        &cfg.placement.etas,
    )
}

/// First listed position and altitude, every architecture and orientation.
pub fn convergence_jobs(cfg: &ExperimentConfig) -> Vec<Job> {
    expand(
        cfg,
        &placements(&cfg.placement.positions[..1]),
        &cfg.placement.altitudes[..1],
        &cfg.placement.etas,
    )
}

pub fn run_position_grid(cfg: &ExperimentConfig) -> Vec<SweepRecord> {
    run_jobs(cfg, &position_grid_jobs(cfg))
}

pub fn run_altitude_orientation_sweep(cfg: &ExperimentConfig) -> Vec<SweepRecord> {
    run_jobs(cfg, &sweep_jobs(cfg))
}

/// Outer-iteration trace of one convergence job.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub architecture: SurfaceMode,
    pub eta_index: Option<usize>,
    pub eta: Option<f64>,
    pub trial: usize,
    pub entry: TraceEntry,
}

/// Records and per-iteration traces at the first position and altitude.
pub fn run_convergence(cfg: &ExperimentConfig) -> (Vec<SweepRecord>, Vec<TraceRow>) {
    let jobs = convergence_jobs(cfg);
    let mut results: Vec<(SweepRecord, Vec<TraceEntry>)> =
        jobs.par_iter().map(|j| run_job(cfg, j)).collect();
    results.sort_by(|a, b| a.0.key().cmp(&b.0.key()));
    let mut rows = Vec::new();
    for (record, trace) in &results {
        rows.extend(trace.iter().map(|&entry| TraceRow {
            architecture: record.architecture,
            eta_index: record.eta_index,
            eta: record.eta,
            trial: record.trial,
            entry,
        }));
    }
    (results.into_iter().map(|(r, _)| r).collect(), rows)
}

/// Mean sum rate over the successful trials of each (placement, altitude,
/// architecture, orientation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub architecture: SurfaceMode,
    pub placement_index: usize,
    pub x: f64,
    pub y: f64,
    pub altitude: f64,
    pub eta: Option<f64>,
    pub trials: usize,
    pub failed: usize,
    pub mean_sum_rate: f64,
    pub std_sum_rate: f64,
}

pub fn summarize(records: &[SweepRecord]) -> Vec<SummaryRow> {
    let mut sorted: Vec<&SweepRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.key().cmp(&b.key()));
    let group = |r: &SweepRecord| (r.placement_index, r.altitude_index, r.architecture, r.eta_index);
    let mut rows = Vec::new();
    for chunk in sorted.chunk_by(|a, b| group(a) == group(b)) {
        let first = chunk[0];
        let ok: Vec<f64> = chunk.iter().filter(|r| !r.is_failed()).map(|r| r.sum_rate).collect();
        let n = ok.len() as f64;
        let mean = ok.iter().sum::<f64>() / n;
        let var = if ok.len() > 1 {
            ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        rows.push(SummaryRow {
            architecture: first.architecture,
            placement_index: first.placement_index,
            x: first.x,
            y: first.y,
            altitude: first.altitude,
            eta: first.eta,
            trials: chunk.len(),
            failed: chunk.len() - ok.len(),
            mean_sum_rate: mean,
            std_sum_rate: var.sqrt(),
        });
    }
    rows
}
