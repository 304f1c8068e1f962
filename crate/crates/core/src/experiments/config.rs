//! Experiment configuration: a TOML document with unit-suffixed quantities,
//! resolved into linear units and radians.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::units::Quantity;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::geometry::Position3D;
use crate::optimizer::{SolverOptions, SurfaceMode};

/// Rectangle users are dropped in, at a fixed height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub user_height: f64,
}

impl Default for Region {
    fn default() -> Self {
        Self {
            x: [0.0, 100.0],
            y: [0.0, 100.0],
            user_height: 0.0,
        }
    }
}

/// Horizontal surface positions. The grid covers the user region with
/// `nx * ny` cell centres; the position list feeds every other experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub positions: Vec<[f64; 2]>,
    pub grid: [usize; 2],
    pub altitudes: Vec<f64>,
    /// STAR orientations in radians.
    pub etas: Vec<f64>,
    /// STAR orientation used by the position grid.
    pub grid_eta: f64,
}

impl Default for Placement {
    fn default() -> Self {
        Self {
            positions: vec![[50.0, 50.0]],
            grid: [5, 5],
            altitudes: vec![40.0],
            etas: vec![0.0],
            grid_eta: 0.0,
        }
    }
}

impl Placement {
    /// Cell centres of the grid over `region`, x varying fastest.
    pub fn grid_points(&self, region: &Region) -> Vec<[f64; 2]> {
        let [nx, ny] = self.grid;
        let dx = (region.x[1] - region.x[0]) / nx as f64;
        let dy = (region.y[1] - region.y[0]) / ny as f64;
        (0..ny)
            .flat_map(|j| {
                (0..nx).map(move |i| {
                    [
                        region.x[0] + (i as f64 + 0.5) * dx,
                        region.y[0] + (j as f64 + 0.5) * dy,
                    ]
                })
            })
            .collect()
    }
}

/// Fully resolved experiment configuration. This is what run manifests store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub region: Region,
    pub placement: Placement,
    pub trials: usize,
    pub master_seed: u64,
    pub architectures: Vec<SurfaceMode>,
    /// Reuse one set of user positions for every trial and placement.
    pub freeze_users: bool,
    pub solver: SolverOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            region: Region::default(),
            placement: Placement::default(),
            trials: 20,
            master_seed: 1,
            architectures: vec![SurfaceMode::Ris, SurfaceMode::Star],
            freeze_users: false,
            solver: SolverOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg = file.resolve()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.solver.validate()?;
        let r = &self.region;
        let finite = r.x.iter().chain(&r.y).all(|v| v.is_finite()) && r.user_height.is_finite();
        if !finite || r.x[1] <= r.x[0] || r.y[1] <= r.y[0] {
            return Err(Error::Config("region must satisfy min < max in x and y".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.architectures.is_empty() {
            return Err(Error::Config("at least one architecture is required".into()));
        }
        let p = &self.placement;
        if p.positions.is_empty() || p.altitudes.is_empty() || p.etas.is_empty() {
            return Err(Error::Config("placement needs positions, altitudes and etas".into()));
        }
        if p.grid[0] == 0 || p.grid[1] == 0 {
            return Err(Error::Config("grid dimensions must be >= 1".into()));
        }
        let values = p.positions.iter().flatten().chain(&p.altitudes).chain(&p.etas);
        if !values.chain([&p.grid_eta]).all(|v| v.is_finite()) {
            return Err(Error::Config("placement values must be finite".into()));
        }
        Ok(())
    }

    pub fn bs(&self) -> Position3D {
        self.system.bs_position
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    system: SystemSection,
    #[serde(default)]
    region: RegionSection,
    #[serde(default)]
    placement: PlacementSection,
    trials: Option<usize>,
    master_seed: Option<u64>,
    architectures: Option<Vec<SurfaceMode>>,
    #[serde(default)]
    freeze_users: bool,
    #[serde(default)]
    solver: SolverOptions,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    antennas: Option<usize>,
    elements: Option<usize>,
    users: Option<usize>,
    p_max: Option<Quantity>,
    noise: Option<Quantity>,
    q_bs: Option<f64>,
    q_user: Option<f64>,
    q_surface: Option<f64>,
    rho0: Option<Quantity>,
    rician_bs_surface: Option<f64>,
    rician_surface_user: Option<f64>,
    bs_position: Option<[f64; 3]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionSection {
    x: Option<[f64; 2]>,
    y: Option<[f64; 2]>,
    user_height: Option<Quantity>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlacementSection {
    positions: Option<Vec<[f64; 2]>>,
    grid: Option<[usize; 2]>,
    altitudes: Option<Vec<Quantity>>,
    etas: Option<Vec<Quantity>>,
    grid_eta: Option<Quantity>,
}

impl ConfigFile {
    fn resolve(self) -> Result<ExperimentConfig> {
        let d = ExperimentConfig::default();
        let s = self.system;
        let ds = d.system;
        let system = SystemConfig {
            antennas: s.antennas.unwrap_or(ds.antennas),
            elements: s.elements.unwrap_or(ds.elements),
            users: s.users.unwrap_or(ds.users),
            p_max_mw: s.p_max.map_or(Ok(ds.p_max_mw), |q| q.power_mw("system.p_max"))?,
            noise_mw: s.noise.map_or(Ok(ds.noise_mw), |q| q.power_mw("system.noise"))?,
            q_bs: s.q_bs.unwrap_or(ds.q_bs),
            q_user: s.q_user.unwrap_or(ds.q_user),
            q_surface: s.q_surface.unwrap_or(ds.q_surface),
            rho0_db: s.rho0.map_or(Ok(ds.rho0_db), |q| q.decibels("system.rho0"))?,
            rician_bs_surface: s.rician_bs_surface.unwrap_or(ds.rician_bs_surface),
            rician_surface_user: s.rician_surface_user.unwrap_or(ds.rician_surface_user),
            bs_position: s
                .bs_position
                .map_or(ds.bs_position, |[x, y, z]| Position3D::new(x, y, z)),
        };
        let region = Region {
            x: self.region.x.unwrap_or(d.region.x),
            y: self.region.y.unwrap_or(d.region.y),
            user_height: self
                .region
                .user_height
                .map_or(Ok(d.region.user_height), |q| q.meters("region.user_height"))?,
        };
        let p = self.placement;
        let placement = Placement {
            positions: p.positions.unwrap_or(d.placement.positions),
            grid: p.grid.unwrap_or(d.placement.grid),
            altitudes: match p.altitudes {
                Some(list) => list
                    .iter()
                    .map(|q| q.meters("placement.altitudes"))
                    .collect::<Result<_>>()?,
                None => d.placement.altitudes,
            },
            etas: match p.etas {
                Some(list) => list
                    .iter()
                    .map(|q| q.radians("placement.etas"))
                    .collect::<Result<_>>()?,
                None => d.placement.etas,
            },
            grid_eta: p
                .grid_eta
                .map_or(Ok(d.placement.grid_eta), |q| q.radians("placement.grid_eta"))?,
        };
        let mut architectures = self.architectures.unwrap_or(d.architectures);
        architectures.sort();
        architectures.dedup();
        Ok(ExperimentConfig {
            system,
            region,
            placement,
            trials: self.trials.unwrap_or(d.trials),
            master_seed: self.master_seed.unwrap_or(d.master_seed),
            architectures,
            freeze_users: self.freeze_users,
            solver: self.solver,
        })
    }
}
