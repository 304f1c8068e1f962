//! Directional path loss and Rician fading for the BS -> surface and
//! surface -> user links.
//!
//! Both endpoints (BS and users) are assumed to steer their main lobe at the
//! surface, so only the surface pattern enters the path loss. The LoS parts
//! are far-field responses of half-wavelength uniform linear arrays: the BS
//! array lies along +x, the surface array along its in-plane horizontal axis.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::geometry::{ScenarioGeometry, Side, SurfaceKind};
use crate::units::db_to_linear;

/// Normalized `cos^q` power pattern, zero outside the front hemisphere.
pub fn pattern_gain(theta: f64, q: f64) -> f64 {
    if (0.0..=std::f64::consts::FRAC_PI_2).contains(&theta) {
        theta.cos().max(0.0).powf(q)
    } else {
        0.0
    }
}

/// Maximum directivity of a `cos^q` pattern.
pub fn directivity(q: f64) -> f64 {
    2.0 * q + 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Reference path-loss gain in dB.
    pub rho0_db: f64,
    pub distance: f64,
    /// Pattern argument at the surface, already folded into `[0, 1]`.
    pub surface_cos: f64,
    /// Directivity exponents of the two link endpoints.
    pub q_a: f64,
    pub q_b: f64,
    pub q_surface: f64,
}

/// Large-scale gain `rho0 / d^2 * 10^(0.2 (q_a + q_b + 2)) * cos^q_surface`.
pub fn link_path_loss(b: &LinkBudget) -> Result<f64> {
    if !(b.distance > 0.0) {
        return Err(Error::Domain(format!("link distance must be > 0, got {}", b.distance)));
    }
    if !(0.0..=1.0).contains(&b.surface_cos) {
        return Err(Error::Domain(format!(
            "surface cosine must lie in [0, 1], got {}",
            b.surface_cos
        )));
    }
    let directivity_gain = 10f64.powf(0.2 * (b.q_a + b.q_b + 2.0));
    Ok(db_to_linear(b.rho0_db) / (b.distance * b.distance)
        * directivity_gain
        * b.surface_cos.powf(b.q_surface))
}

/// `[1, e^{j pi s}, ..., e^{j pi (n-1) s}]` with `s` the sine of the angle
/// off broadside.
pub fn steering_vector(n: usize, sin_angle: f64) -> DVector<Complex64> {
    DVector::from_fn(n, |i, _| Complex64::from_polar(1.0, std::f64::consts::PI * i as f64 * sin_angle))
}

/// Rank-one `N x M` LoS matrix `a_N(surface) a_M(bs)^H`.
pub fn los_matrix(n: usize, m: usize, sin_surface: f64, sin_bs: f64) -> DMatrix<Complex64> {
    let a_n = steering_vector(n, sin_surface);
    let a_m = steering_vector(m, sin_bs);
    &a_n * a_m.adjoint()
}

pub fn los_vector(n: usize, sin_surface: f64) -> DVector<Complex64> {
    steering_vector(n, sin_surface)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicianParams {
    pub k_factor: f64,
    pub path_loss: f64,
}

/// `sqrt(rho) (sqrt(K/(1+K)) LoS + sqrt(1/(1+K)) NLoS)` with unit-variance
/// circularly-symmetric Gaussian NLoS entries.
pub fn sample_rician<R: Rng + ?Sized>(
    p: &RicianParams,
    los: &DMatrix<Complex64>,
    rng: &mut R,
) -> DMatrix<Complex64> {
    let los_w = (p.k_factor / (1.0 + p.k_factor)).sqrt();
    let nlos_w = (1.0 / (1.0 + p.k_factor)).sqrt();
    let scale = p.path_loss.sqrt();
    let half = std::f64::consts::FRAC_1_SQRT_2;
    // Column-major fill order keeps draws stable for a given shape.
    DMatrix::from_fn(los.nrows(), los.ncols(), |i, j| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let nlos = Complex64::new(re * half, im * half);
        (los[(i, j)] * los_w + nlos * nlos_w) * scale
    })
}

/// Independent RNG substream for one link under a scenario seed.
pub fn link_rng(seed: u64, link: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(link);
    rng
}

/// Link index of the BS -> surface channel; user `k` uses `k + 1`.
pub const BS_LINK: u64 = 0;

/// One fading realization for a scenario.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// `N x M` BS -> surface channel.
    pub h_br: DMatrix<Complex64>,
    /// Surface -> user channels, each of length `N`.
    pub h_ru: Vec<DVector<Complex64>>,
    pub path_loss_bs: f64,
    pub path_loss_users: Vec<f64>,
    /// Half-space of each user; picks which coefficient vector serves it.
    pub sides: Vec<Side>,
}

impl ChannelSet {
    pub fn elements(&self) -> usize {
        self.h_br.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.h_br.ncols()
    }

    pub fn users(&self) -> usize {
        self.h_ru.len()
    }
}

fn fold_surface_cos(kind: SurfaceKind, c: f64) -> f64 {
    match kind {
        SurfaceKind::VerticalStar => c.abs(),
        SurfaceKind::HorizontalRis => c.max(0.0),
    }
    .min(1.0)
}

pub fn build_channel_set(
    config: &SystemConfig,
    geom: &ScenarioGeometry,
    seed: u64,
) -> Result<ChannelSet> {
    let (n, m) = (config.elements, config.antennas);
    if geom.num_users() != config.users {
        return Err(Error::Dimension {
            context: "build_channel_set users",
            expected: config.users,
            actual: geom.num_users(),
        });
    }
    let kind = geom.orientation.kind;
    let axis = geom.orientation.array_axis();

    let path_loss_bs = link_path_loss(&LinkBudget {
        rho0_db: config.rho0_db,
        distance: geom.d_bs,
        surface_cos: fold_surface_cos(kind, geom.incidence.cos_bs),
        q_a: config.q_bs,
        q_b: config.q_surface,
        q_surface: config.q_surface,
    })?;
    let los_br = los_matrix(n, m, geom.e_bs.dot(&axis), geom.e_bs.x);
    let h_br = sample_rician(
        &RicianParams {
            k_factor: config.rician_bs_surface,
            path_loss: path_loss_bs,
        },
        &los_br,
        &mut link_rng(seed, BS_LINK),
    );

    let mut h_ru = Vec::with_capacity(config.users);
    let mut path_loss_users = Vec::with_capacity(config.users);
    for k in 0..config.users {
        let rho = link_path_loss(&LinkBudget {
            rho0_db: config.rho0_db,
            distance: geom.d_users[k],
            surface_cos: fold_surface_cos(kind, geom.incidence.cos_user[k]),
            q_a: config.q_surface,
            q_b: config.q_user,
            q_surface: config.q_surface,
        })?;
        let departure = -geom.e_users[k];
        let los = DMatrix::from_column_slice(n, 1, los_vector(n, departure.dot(&axis)).as_slice());
        let h = sample_rician(
            &RicianParams {
                k_factor: config.rician_surface_user,
                path_loss: rho,
            },
            &los,
            &mut link_rng(seed, k as u64 + 1),
        );
        h_ru.push(DVector::from_column_slice(h.as_slice()));
        path_loss_users.push(rho);
    }

    Ok(ChannelSet {
        h_br,
        h_ru,
        path_loss_bs,
        path_loss_users,
        sides: geom.incidence.side.clone(),
    })
}
