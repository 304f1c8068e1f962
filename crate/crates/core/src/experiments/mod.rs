//! Config-driven Monte Carlo experiments: convergence traces at one
//! placement, position grids, and altitude/orientation sweeps.

pub mod config;
pub mod persist;
pub mod runner;
pub mod seeds;
pub mod units;

pub use config::{ExperimentConfig, Placement, Region};
pub use persist::{persist_results, read_records, write_records, Manifest};
pub use runner::{
    convergence_jobs, position_grid_jobs, run_altitude_orientation_sweep, run_convergence, run_job,
    run_jobs, run_position_grid, run_single, summarize, sweep_jobs, Job, RecordStatus, SummaryRow,
    SurfacePlacement, SweepRecord, TraceRow,
};
