//! Output files. Tables are CSV with a fixed header and every float printed
//! with 17 significant digits; the manifest is pretty-printed JSON.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::runner::{RecordStatus, SummaryRow, SweepRecord, TraceRow};
use super::seeds::SEED_RULE;
use crate::error::{Error, Result};
use crate::optimizer::SurfaceMode;

pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Column order of the records table. `eta_index`, `eta` and `error` are
/// empty when not applicable; `user_rates` is `;`-separated.
pub const RECORD_HEADER: [&str; 23] = [
    "architecture",
    "placement_index",
    "x",
    "y",
    "altitude_index",
    "altitude",
    "eta_index",
    "eta",
    "trial",
    "scenario_seed",
    "seed",
    "status",
    "sum_rate",
    "user_rates",
    "reflection_users",
    "outer_iterations",
    "inner_iterations",
    "power_slack",
    "coupling_residual",
    "energy_split_residual",
    "modulus_residual",
    "pdd_violation",
    "error",
];

pub const SUMMARY_HEADER: [&str; 10] = [
    "architecture",
    "placement_index",
    "x",
    "y",
    "altitude",
    "eta",
    "trials",
    "failed",
    "mean_sum_rate",
    "std_sum_rate",
];

pub const TRACE_HEADER: [&str; 12] = [
    "architecture",
    "eta_index",
    "eta",
    "trial",
    "outer",
    "inner_cycles",
    "objective",
    "augmented",
    "sum_rate",
    "feasible_sum_rate",
    "violation",
    "rho",
];

/// Run metadata written next to the tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact: String,
    pub version: String,
    pub command: String,
    pub master_seed: u64,
    pub seed_rule: String,
    pub record_count: usize,
    pub files: Vec<String>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig, record_count: usize, files: &[&str]) -> Self {
        Self {
            artifact: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            master_seed: config.master_seed,
            seed_rule: SEED_RULE.to_string(),
            record_count,
            files: files.iter().map(|s| s.to_string()).collect(),
            config: config.clone(),
        }
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn status_str(s: RecordStatus) -> &'static str {
    match s {
        RecordStatus::Converged => "converged",
        RecordStatus::MaxIterations => "max_iterations",
        RecordStatus::Failed => "failed",
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_table<const N: usize>(path: &Path, header: [&str; N], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn record_row(r: &SweepRecord) -> Vec<String> {
    vec![
        r.architecture.to_string(),
        r.placement_index.to_string(),
        fmt_f64(r.x),
        fmt_f64(r.y),
        r.altitude_index.to_string(),
        fmt_f64(r.altitude),
        fmt_opt(r.eta_index),
        fmt_opt(r.eta.map(fmt_f64)),
        r.trial.to_string(),
        r.scenario_seed.to_string(),
        r.seed.to_string(),
        status_str(r.status).to_string(),
        fmt_f64(r.sum_rate),
        r.user_rates.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(";"),
        r.reflection_users.to_string(),
        r.outer_iterations.to_string(),
        r.inner_iterations.to_string(),
        fmt_f64(r.power_slack),
        fmt_f64(r.coupling_residual),
        fmt_f64(r.energy_split_residual),
        fmt_f64(r.modulus_residual),
        fmt_f64(r.pdd_violation),
        r.error.clone().unwrap_or_default(),
    ]
}

pub fn write_records(path: &Path, records: &[SweepRecord]) -> Result<()> {
    write_table(path, RECORD_HEADER, records.iter().map(record_row).collect())
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let rows = rows
        .iter()
        .map(|s| {
            vec![
                s.architecture.to_string(),
                s.placement_index.to_string(),
                fmt_f64(s.x),
                fmt_f64(s.y),
                fmt_f64(s.altitude),
                fmt_opt(s.eta.map(fmt_f64)),
                s.trials.to_string(),
                s.failed.to_string(),
                fmt_f64(s.mean_sum_rate),
                fmt_f64(s.std_sum_rate),
            ]
        })
        .collect();
    write_table(path, SUMMARY_HEADER, rows)
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let rows = rows
        .iter()
        .map(|t| {
            let e = &t.entry;
            vec![
                t.architecture.to_string(),
                fmt_opt(t.eta_index),
                fmt_opt(t.eta.map(fmt_f64)),
                t.trial.to_string(),
                e.outer.to_string(),
                e.inner_cycles.to_string(),
                fmt_f64(e.objective),
                fmt_f64(e.augmented),
                fmt_f64(e.sum_rate),
                fmt_f64(e.feasible_sum_rate),
                fmt_f64(e.violation),
                fmt_f64(e.rho),
            ]
        })
        .collect();
    write_table(path, TRACE_HEADER, rows)
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes records, their summary and the manifest into `dir`, creating it if
/// needed. Returns the paths written.
pub fn persist_results(
    dir: &Path,
    command: &str,
    config: &ExperimentConfig,
    records: &[SweepRecord],
    summary: &[SummaryRow],
    trace: Option<&[TraceRow]>,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = vec![RECORDS_FILE, SUMMARY_FILE];
    if trace.is_some() {
        names.push(TRACE_FILE);
    }
    write_records(&dir.join(RECORDS_FILE), records)?;
    write_summary(&dir.join(SUMMARY_FILE), summary)?;
    if let Some(rows) = trace {
        write_trace(&dir.join(TRACE_FILE), rows)?;
    }
    let manifest = Manifest::new(command, config, records.len(), &names);
    write_manifest(&dir.join(MANIFEST_FILE), &manifest)?;
    names.push(MANIFEST_FILE);
    Ok(names.into_iter().map(|n| dir.join(n)).collect())
}

fn bad_data(path: &Path, msg: String) -> Error {
    Error::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, msg))
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, text: &str) -> Result<T> {
    text.parse()
        .map_err(|_| bad_data(path, format!("row {line}: bad {name} value {text:?}")))
}

/// Parses a records table written by [`write_records`].
pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(RECORD_HEADER) {
        return Err(bad_data(path, "unexpected records header".into()));
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let f = |c: usize| row.get(c).unwrap_or("");
        let float = |c: usize| parse_field::<f64>(path, i + 1, RECORD_HEADER[c], f(c));
        let uint = |c: usize| parse_field::<usize>(path, i + 1, RECORD_HEADER[c], f(c));
        let seed = |c: usize| parse_field::<u64>(path, i + 1, RECORD_HEADER[c], f(c));
        let architecture = match f(0) {
            "ris" => SurfaceMode::Ris,
            "star" => SurfaceMode::Star,
            other => return Err(bad_data(path, format!("row {}: bad architecture {other:?}", i + 1))),
        };
        let status = match f(11) {
            "converged" => RecordStatus::Converged,
            "max_iterations" => RecordStatus::MaxIterations,
            "failed" => RecordStatus::Failed,
            other => return Err(bad_data(path, format!("row {}: bad status {other:?}", i + 1))),
        };
        out.push(SweepRecord {
            architecture,
            placement_index: uint(1)?,
            x: float(2)?,
            y: float(3)?,
            altitude_index: uint(4)?,
            altitude: float(5)?,
            eta_index: if f(6).is_empty() { None } else { Some(uint(6)?) },
            eta: if f(7).is_empty() { None } else { Some(float(7)?) },
            trial: uint(8)?,
            scenario_seed: seed(9)?,
            seed: seed(10)?,
            status,
            sum_rate: float(12)?,
            user_rates: f(13)
                .split(';')
                .filter(|s| !s.is_empty())
                .map(|s| parse_field(path, i + 1, "user_rates", s))
                .collect::<Result<_>>()?,
            reflection_users: uint(14)?,
            outer_iterations: uint(15)?,
            inner_iterations: uint(16)?,
            power_slack: float(17)?,
            coupling_residual: float(18)?,
            energy_split_residual: float(19)?,
            modulus_residual: float(20)?,
            pdd_violation: float(21)?,
            error: if f(22).is_empty() { None } else { Some(f(22).to_string()) },
            wall_time: Default::default(),
        });
    }
    Ok(out)
}
