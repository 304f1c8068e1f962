//! Surface-coefficient block. With the copies fixed, the augmented
//! objective is an unconstrained strictly convex quadratic in each of
//! `theta_t` and `theta_r`:
//!
//! ```text
//! theta^H Q theta - 2 Re{b^H theta} + const
//! Q = sum_{k in side} w_k |nu_k|^2 sum_j conj(a_kj) a_kj^T + c I
//! b = sum_{k in side} w_k conj(nu_k) conj(a_kk) + c (theta_aux + rho lambda)
//! ```
//!
//! with `a_kj = conj(h_{R,k}) .* (H w_j)` and `c` the penalty weight.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::evaluation::{AuxSide, PddState, Precoders, SurfaceCoefficients};
use crate::geometry::Side;

/// Normal equations `Q theta = b` of one side.
#[derive(Debug, Clone)]
pub struct SideSystem {
    pub q: DMatrix<Complex64>,
    pub b: DVector<Complex64>,
}

pub fn side_system(
    side: Side,
    channels: &ChannelSet,
    precoders: &Precoders,
    weights: &[f64],
    receivers: &[Complex64],
    aux: &AuxSide,
    dual: &DVector<Complex64>,
    rho: f64,
    penalty_weight: f64,
) -> SideSystem {
    let n = channels.elements();
    let k_users = channels.users();
    let hw = &channels.h_br * &precoders.w;
    let members: Vec<usize> = (0..k_users).filter(|&k| channels.sides[k] == side).collect();

    let mut z = DMatrix::<Complex64>::zeros(n, members.len() * k_users);
    let mut b: DVector<Complex64> =
        (aux.coefficients() + dual * Complex64::new(rho, 0.0)) * Complex64::new(penalty_weight, 0.0);
    for (slot, &k) in members.iter().enumerate() {
        let h = &channels.h_ru[k];
        let amp = (weights[k]).sqrt() * receivers[k].norm();
        for j in 0..k_users {
            // conj(a_kj) = h_k .* conj(H w_j)
            let col = h.component_mul(&hw.column(j).map(|x| x.conj()));
            if j == k {
                b += &col * (receivers[k].conj() * weights[k]);
            }
            z.set_column(slot * k_users + j, &(col * Complex64::new(amp, 0.0)));
        }
    }
    let mut q = &z * z.adjoint();
    for i in 0..n {
        q[(i, i)] += Complex64::new(penalty_weight, 0.0);
    }
    SideSystem { q, b }
}

impl SideSystem {
    pub fn solve(&self) -> DVector<Complex64> {
        let q = (&self.q + self.q.adjoint()) * Complex64::new(0.5, 0.0);
        match q.clone().cholesky() {
            Some(ch) => ch.solve(&self.b),
            // Only reachable through severe rounding; LU copes with it.
            None => q.lu().solve(&self.b).expect("penalty term keeps Q nonsingular"),
        }
    }

    /// `||Q theta - b|| / ||b||`.
    pub fn relative_residual(&self, theta: &DVector<Complex64>) -> f64 {
        let r = &self.q * theta - &self.b;
        r.norm() / self.b.norm().max(f64::MIN_POSITIVE)
    }
}

/// Minimize the augmented objective over `theta_t` and `theta_r`. Only users
/// on side `i` shape `theta_i`; with none, `theta_i = theta_aux_i + rho lambda_i`.
pub fn update_surface_coeffs(
    channels: &ChannelSet,
    precoders: &Precoders,
    weights: &[f64],
    receivers: &[Complex64],
    pdd: &PddState,
) -> SurfaceCoefficients {
    let pw = pdd.penalty_weight();
    let theta_r = side_system(
        Side::Reflection,
        channels,
        precoders,
        weights,
        receivers,
        &pdd.aux_r,
        &pdd.dual_r,
        pdd.rho,
        pw,
    )
    .solve();
    let theta_t = match (&pdd.aux_t, &pdd.dual_t) {
        (Some(aux), Some(dual)) => Some(
            side_system(
                Side::Transmission,
                channels,
                precoders,
                weights,
                receivers,
                aux,
                dual,
                pdd.rho,
                pw,
            )
            .solve(),
        ),
        _ => None,
    };
    SurfaceCoefficients { theta_t, theta_r }
}
