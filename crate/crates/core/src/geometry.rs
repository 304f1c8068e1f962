//! Scenario geometry: link angles, surface normals and the split of users
//! into the reflection and transmission half-spaces of the surface.
//!
//! Direction vectors point *from* an endpoint (BS or user) *towards* the
//! surface. Incidence cosines are `-n · e` where `n` is the surface normal,
//! so a horizontal RIS facing the ground (`n = [0, 0, -1]`) sees a positive
//! cosine for every endpoint below it.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cartesian position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3D {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: &Position3D) -> f64 {
        (other.to_vector() - self.to_vector()).norm()
    }

    pub fn translated(&self, by: Vector3<f64>) -> Position3D {
        Position3D::new(self.x + by.x, self.y + by.y, self.z + by.z)
    }
}

/// Azimuth in `(-pi, pi]` measured from +x in the horizontal plane and
/// elevation in `[-pi/2, pi/2]` above that plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalDirection {
    pub azimuth: f64,
    pub elevation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    /// Reflect-only surface mounted parallel to the ground, facing down.
    HorizontalRis,
    /// Transmit-and-reflect surface mounted vertically.
    VerticalStar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceOrientation {
    pub kind: SurfaceKind,
    /// Rotation of the vertical surface's normal about +z, counterclockwise
    /// from +x. Ignored for the horizontal RIS.
    pub eta: f64,
}

impl SurfaceOrientation {
    pub const fn horizontal_ris() -> Self {
        Self {
            kind: SurfaceKind::HorizontalRis,
            eta: 0.0,
        }
    }

    pub const fn vertical_star(eta: f64) -> Self {
        Self {
            kind: SurfaceKind::VerticalStar,
            eta,
        }
    }

    pub fn normal(&self) -> Vector3<f64> {
        match self.kind {
            SurfaceKind::HorizontalRis => Vector3::new(0.0, 0.0, -1.0),
            SurfaceKind::VerticalStar => Vector3::new(self.eta.cos(), self.eta.sin(), 0.0),
        }
    }

    /// In-plane horizontal axis along which the surface elements are laid out.
    pub fn array_axis(&self) -> Vector3<f64> {
        match self.kind {
            SurfaceKind::HorizontalRis => Vector3::new(1.0, 0.0, 0.0),
            SurfaceKind::VerticalStar => Vector3::new(-self.eta.sin(), self.eta.cos(), 0.0),
        }
    }
}

/// Half-space of the surface a user lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Reflection,
    Transmission,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceGeometry {
    /// Surface-side cosine of the BS link.
    pub cos_bs: f64,
    /// Surface-side cosine of each user link. Signed; the pattern uses the
    /// absolute value on a STAR surface.
    pub cos_user: Vec<f64>,
    pub side: Vec<Side>,
}

/// Angles of `to - from`. The azimuth of a purely vertical offset is 0.
pub fn spherical_angles(from: Position3D, to: Position3D) -> Result<SphericalDirection> {
    let d = to.to_vector() - from.to_vector();
    if d.norm() == 0.0 {
        return Err(Error::Domain(format!(
            "coincident points ({}, {}, {})",
            from.x, from.y, from.z
        )));
    }
    let horizontal = d.x.hypot(d.y);
    let (azimuth, elevation) = if horizontal == 0.0 {
        (0.0, FRAC_PI_2.copysign(d.z))
    } else {
        let mut az = d.y.atan2(d.x);
        if az <= -PI {
            az = PI;
        }
        (az, d.z.atan2(horizontal))
    };
    Ok(SphericalDirection { azimuth, elevation })
}

pub fn unit_direction(d: SphericalDirection) -> Vector3<f64> {
    let (sa, ca) = d.azimuth.sin_cos();
    let (sb, cb) = d.elevation.sin_cos();
    Vector3::new(cb * ca, cb * sa, sb)
}

/// Incidence cosines for the BS link and every user link, plus the
/// half-space classification. A user with cosine exactly 0 counts as
/// reflection.
pub fn incidence_geometry(
    orient: &SurfaceOrientation,
    e_bs: &Vector3<f64>,
    e_users: &[Vector3<f64>],
) -> IncidenceGeometry {
    let n = orient.normal();
    let cosine = |e: &Vector3<f64>| (-n.dot(e)).clamp(-1.0, 1.0);
    let cos_user: Vec<f64> = e_users.iter().map(cosine).collect();
    let side = cos_user
        .iter()
        .map(|&c| match orient.kind {
            SurfaceKind::HorizontalRis => Side::Reflection,
            SurfaceKind::VerticalStar if c >= 0.0 => Side::Reflection,
            SurfaceKind::VerticalStar => Side::Transmission,
        })
        .collect();
    IncidenceGeometry {
        cos_bs: cosine(e_bs),
        cos_user,
        side,
    }
}

/// Zero-based `(reflection, transmission)` index sets.
pub fn classify_users(geom: &IncidenceGeometry) -> (Vec<usize>, Vec<usize>) {
    let mut reflection = Vec::new();
    let mut transmission = Vec::new();
    for (k, side) in geom.side.iter().enumerate() {
        match side {
            Side::Reflection => reflection.push(k),
            Side::Transmission => transmission.push(k),
        }
    }
    (reflection, transmission)
}

/// Full placement of BS, surface and users with every derived quantity the
/// channel model needs.
#[derive(Debug, Clone)]
pub struct ScenarioGeometry {
    pub bs: Position3D,
    pub surface: Position3D,
    pub orientation: SurfaceOrientation,
    pub users: Vec<Position3D>,
    /// Unit direction BS -> surface.
    pub e_bs: Vector3<f64>,
    /// Unit directions user -> surface.
    pub e_users: Vec<Vector3<f64>>,
    pub incidence: IncidenceGeometry,
    pub d_bs: f64,
    pub d_users: Vec<f64>,
}

impl ScenarioGeometry {
    pub fn new(
        bs: Position3D,
        surface: Position3D,
        orientation: SurfaceOrientation,
        users: Vec<Position3D>,
    ) -> Result<Self> {
        if !bs.is_finite() || !surface.is_finite() || users.iter().any(|u| !u.is_finite()) {
            return Err(Error::Domain("non-finite position".into()));
        }
        let e_bs = unit_direction(spherical_angles(bs, surface)?);
        let e_users = users
            .iter()
            .map(|u| spherical_angles(*u, surface).map(unit_direction))
            .collect::<Result<Vec<_>>>()?;
        let incidence = incidence_geometry(&orientation, &e_bs, &e_users);
        let d_bs = bs.distance(&surface);
        let d_users = users.iter().map(|u| u.distance(&surface)).collect();
        Ok(Self {
            bs,
            surface,
            orientation,
            users,
            e_bs,
            e_users,
            incidence,
            d_bs,
            d_users,
        })
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }
}
