//! Command-line front end. Data goes to files under `--out`; logs go to
//! stderr; only `single` prints its record on stdout.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info};

use crate::error::Error;
use crate::experiments::persist::persist_results;
use crate::experiments::runner::{self, Job, SurfacePlacement, SweepRecord};
use crate::experiments::units::Quantity;
use crate::experiments::{summarize, ExperimentConfig};
use crate::optimizer::SurfaceMode;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "aerosurf", version, about = "Aerial RIS / STAR-RIS sum-rate experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Increase log detail on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-iteration objective and sum-rate traces at the first position and altitude.
    Converge(RunArgs),
    /// Both architectures over a grid of surface positions.
    Grid(RunArgs),
    /// Altitude and orientation sweep at the listed positions.
    Sweep(RunArgs),
    /// One solve; the record is echoed to stdout.
    Single(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchitectureArg {
    Ris,
    Star,
}

impl From<ArchitectureArg> for SurfaceMode {
    fn from(a: ArchitectureArg) -> Self {
        match a {
            ArchitectureArg::Ris => SurfaceMode::Ris,
            ArchitectureArg::Star => SurfaceMode::Star,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Override the master seed.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Run only this architecture.
    #[arg(long, value_enum)]
    pub architecture: Option<ArchitectureArg>,
    /// Run only this STAR orientation (radians, or e.g. "45 deg").
    #[arg(long, value_name = "RADIANS", value_parser = parse_angle, allow_hyphen_values = true)]
    pub eta: Option<f64>,
    /// Override the number of trials.
    #[arg(long, value_name = "N")]
    pub trials: Option<usize>,
}

fn parse_angle(s: &str) -> Result<f64, String> {
    Quantity::Text(s.to_string()).radians("--eta").map_err(|e| e.to_string())
}

impl RunArgs {
    /// Loads the config and applies flag overrides.
    pub fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(arch) = self.architecture {
            cfg.architectures = vec![arch.into()];
        }
        if let Some(eta) = self.eta {
            cfg.placement.etas = vec![eta];
            cfg.placement.grid_eta = eta;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn single_job(cfg: &ExperimentConfig) -> Job {
    let [x, y] = cfg.placement.positions[0];
    let architecture = cfg.architectures[0];
    Job {
        placement: SurfacePlacement { index: 0, x, y },
        altitude_index: 0,
        altitude: cfg.placement.altitudes[0],
        architecture,
        eta_index: (architecture == SurfaceMode::Star).then_some(0),
        eta: match architecture {
            SurfaceMode::Star => cfg.placement.etas[0],
            SurfaceMode::Ris => 0.0,
        },
        trial: 0,
    }
}

fn dispatch(command: &Command) -> Result<i32, Error> {
    let (name, args) = match command {
        Command::Converge(a) => ("converge", a),
        Command::Grid(a) => ("grid", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Single(a) => ("single", a),
    };
    let cfg = args.resolve()?;
    info!("{name}: master seed {}, {} trials", cfg.master_seed, cfg.trials);
    let (records, trace): (Vec<SweepRecord>, _) = match command {
        Command::Converge(_) => {
            let (records, trace) = runner::run_convergence(&cfg);
            (records, Some(trace))
        }
        Command::Grid(_) => (runner::run_position_grid(&cfg), None),
        Command::Sweep(_) => (runner::run_altitude_orientation_sweep(&cfg), None),
        Command::Single(_) => (vec![runner::run_single(&cfg, &single_job(&cfg))], None),
    };
    let summary = summarize(&records);
    let written = persist_results(&args.out, name, &cfg, &records, &summary, trace.as_deref())?;
    for path in &written {
        info!("wrote {}", path.display());
    }
    if let Command::Single(_) = command {
        let text = serde_json::to_string_pretty(&records[0])
            .map_err(|e| Error::io(&args.out, std::io::Error::other(e)))?;
        let mut stdout = std::io::stdout().lock();
        if let Err(e) = writeln!(stdout, "{text}") {
            if e.kind() != std::io::ErrorKind::BrokenPipe {
                return Err(Error::io("<stdout>", e));
            }
        }
    }
    let failed = records.iter().filter(|r| r.is_failed()).count();
    if !records.is_empty() && failed == records.len() {
        error!("all {failed} solves failed");
        return Ok(EXIT_SOLVER);
    }
    if failed > 0 {
        log::warn!("{failed} of {} solves failed", records.len());
    }
    Ok(EXIT_OK)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .try_init();
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("aerosurf: {e}");
            exit_code(&e)
        }
    }
}
