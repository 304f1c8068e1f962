use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Position3D;
use crate::units::dbm_to_mw;

/// Scenario constants in linear units: powers in mW, Rician factors and
/// directivity exponents dimensionless. `rho0_db` stays in dB and is
/// converted by the path-loss model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// BS antennas (M).
    pub antennas: usize,
    /// Surface elements (N).
    pub elements: usize,
    /// Single-antenna users (K).
    pub users: usize,
    pub p_max_mw: f64,
    pub noise_mw: f64,
    pub q_bs: f64,
    pub q_user: f64,
    pub q_surface: f64,
    pub rho0_db: f64,
    pub rician_bs_surface: f64,
    pub rician_surface_user: f64,
    pub bs_position: Position3D,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            antennas: 8,
            elements: 20,
            users: 4,
            p_max_mw: dbm_to_mw(20.0),
            noise_mw: dbm_to_mw(-70.0),
            q_bs: 20.0,
            q_user: 20.0,
            q_surface: 3.0,
            rho0_db: 1.0,
            rician_bs_surface: 10.0,
            rician_surface_user: 10.0,
            bs_position: Position3D::new(0.0, 0.0, 0.0),
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 || self.elements == 0 || self.users == 0 {
            return Err(Error::Config("antenna, element and user counts must be >= 1".into()));
        }
        let positive = [("p_max", self.p_max_mw), ("noise_power", self.noise_mw)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let nonneg = [
            ("q_bs", self.q_bs),
            ("q_user", self.q_user),
            ("q_surface", self.q_surface),
            ("rician_bs_surface", self.rician_bs_surface),
            ("rician_surface_user", self.rician_surface_user),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !self.rho0_db.is_finite() || !self.bs_position.is_finite() {
            return Err(Error::Config("rho0 and bs_position must be finite".into()));
        }
        Ok(())
    }
}
