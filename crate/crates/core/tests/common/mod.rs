#![allow(dead_code)]

pub mod oracle;

use aerosurf::channel::{build_channel_set, ChannelSet};
use aerosurf::config::SystemConfig;
use aerosurf::geometry::{Position3D, ScenarioGeometry, SurfaceOrientation};
use aerosurf::optimizer::SurfaceMode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Users dropped uniformly over the 100 m x 100 m ground square.
pub fn ground_users(seed: u64, k: usize) -> Vec<Position3D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| Position3D::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0), 0.0))
        .collect()
}

pub fn orientation(mode: SurfaceMode, eta: f64) -> SurfaceOrientation {
    match mode {
        SurfaceMode::Ris => SurfaceOrientation::horizontal_ris(),
        SurfaceMode::Star => SurfaceOrientation::vertical_star(eta),
    }
}

/// Channels for the default system with the surface at `surface`.
pub fn scenario(cfg: &SystemConfig, surface: Position3D, mode: SurfaceMode, eta: f64, seed: u64) -> ChannelSet {
    let users = ground_users(seed, cfg.users);
    let geom = ScenarioGeometry::new(cfg.bs_position, surface, orientation(mode, eta), users).unwrap();
    build_channel_set(cfg, &geom, seed).unwrap()
}

pub fn centre() -> Position3D {
    Position3D::new(50.0, 50.0, 40.0)
}
