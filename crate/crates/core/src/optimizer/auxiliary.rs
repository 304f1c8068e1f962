//! Closed-form updates of the feasible copies `theta_aux_i = beta_i e^{j phi_i}`.
//!
//! Because `beta_t^2 + beta_r^2 = 1`, the copy part of the penalty reduces
//! per element to minimizing
//!
//! ```text
//! Re{c_t beta_t e^{j phi_t}} + Re{c_r beta_r e^{j phi_r}},   c_i = conj(-theta_i + rho lambda_i)
//! ```
//!
//! over the amplitude split and, separately, over phase pairs with
//! `cos(phi_t - phi_r) = 0`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use log::warn;
use nalgebra::DVector;
use num_complex::Complex64;

use crate::evaluation::{PddState, SurfaceCoefficients};

/// Step of the optional amplitude grid check.
pub const ORACLE_GRID_STEP: f64 = 1e-3;

/// Linear coefficients `conj(-theta + rho lambda)` of the copy subproblem.
pub fn copy_coefficients(
    theta: &DVector<Complex64>,
    dual: &DVector<Complex64>,
    rho: f64,
) -> DVector<Complex64> {
    theta.zip_map(dual, |t, l| (-t + l * rho).conj())
}

/// Copy objective of one element.
pub fn element_objective(
    c_t: Complex64,
    c_r: Complex64,
    beta_t: f64,
    beta_r: f64,
    phi_t: f64,
    phi_r: f64,
) -> f64 {
    beta_t * (c_t * Complex64::cis(phi_t)).re + beta_r * (c_r * Complex64::cis(phi_r)).re
}

/// `sgn(q) arccos(p / sqrt(p^2 + q^2))` with `sgn(0) = +1` and `xi = 0` when
/// `p = q = 0`.
pub fn xi_from(p: f64, q: f64) -> f64 {
    let r = p.hypot(q);
    if r == 0.0 {
        return 0.0;
    }
    let sign = if q >= 0.0 { 1.0 } else { -1.0 };
    sign * (p / r).clamp(-1.0, 1.0).acos()
}

/// Optimal split angle: `beta_t = sin psi`, `beta_r = cos psi`.
pub fn psi_from_xi(xi: f64) -> f64 {
    if (-PI..-FRAC_PI_2).contains(&xi) {
        -FRAC_PI_2 - xi
    } else if (-FRAC_PI_2..FRAC_PI_4).contains(&xi) {
        0.0
    } else {
        FRAC_PI_2
    }
}

/// Amplitude split for every element given the current copy phases. Only
/// meaningful for a STAR surface.
///
/// With `p = Re{c_t e^{j phi_t}}` and `q = Re{c_r e^{j phi_r}}` the element
/// objective is `p sin psi + q cos psi` on `[0, pi/2]`.
pub fn update_aux_amplitudes(
    coeff: &SurfaceCoefficients,
    pdd: &PddState,
    oracle_check: bool,
) -> (DVector<f64>, DVector<f64>) {
    let (theta_t, aux_t, dual_t) = match (&coeff.theta_t, &pdd.aux_t, &pdd.dual_t) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => panic!("amplitude update needs both surface sides"),
    };
    let c_t = copy_coefficients(theta_t, dual_t, pdd.rho);
    let c_r = copy_coefficients(&coeff.theta_r, &pdd.dual_r, pdd.rho);
    let n = coeff.elements();
    let mut beta_t = DVector::zeros(n);
    let mut beta_r = DVector::zeros(n);
    for i in 0..n {
        let p = (c_t[i] * Complex64::cis(aux_t.phase[i])).re;
        let q = (c_r[i] * Complex64::cis(pdd.aux_r.phase[i])).re;
        let mut psi = psi_from_xi(xi_from(p, q));
        if oracle_check {
            let f = |psi: f64| p * psi.sin() + q * psi.cos();
            let (grid_psi, grid_val) = grid_minimum(f);
            let closed = f(psi);
            if grid_val < closed - 1e-12 * p.hypot(q).max(1.0) {
                warn!(
                    "element {i}: amplitude closed form {closed:.3e} beaten by grid {grid_val:.3e}"
                );
                psi = grid_psi;
            }
        }
        beta_t[i] = psi.sin();
        beta_r[i] = psi.cos();
    }
    (beta_t, beta_r)
}

fn grid_minimum(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let steps = (FRAC_PI_2 / ORACLE_GRID_STEP).ceil() as usize;
    (0..=steps)
        .map(|s| (s as f64 * ORACLE_GRID_STEP).min(FRAC_PI_2))
        .map(|psi| (psi, f(psi)))
        .fold((0.0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// The two coupled phase pairs that can minimize one element:
/// `(pi - arg w+, 3pi/2 - arg w+)` and `(pi - arg w-, pi/2 - arg w-)` with
/// `w+- = v_t +- j v_r`.
pub fn phase_candidates(v_t: Complex64, v_r: Complex64) -> [(f64, f64); 2] {
    let j = Complex64::i();
    let plus = arg0(v_t + j * v_r);
    let minus = arg0(v_t - j * v_r);
    [
        (PI - plus, 1.5 * PI - plus),
        (PI - minus, FRAC_PI_2 - minus),
    ]
}

/// Argument with `arg(0) = 0`.
fn arg0(z: Complex64) -> f64 {
    if z == Complex64::new(0.0, 0.0) {
        0.0
    } else {
        z.arg()
    }
}

/// Coupled copy phases for every element given the amplitudes.
pub fn update_aux_phases(
    coeff: &SurfaceCoefficients,
    pdd: &PddState,
    beta_t: &DVector<f64>,
    beta_r: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let (theta_t, dual_t) = match (&coeff.theta_t, &pdd.dual_t) {
        (Some(a), Some(b)) => (a, b),
        _ => panic!("phase update needs both surface sides"),
    };
    let c_t = copy_coefficients(theta_t, dual_t, pdd.rho);
    let c_r = copy_coefficients(&coeff.theta_r, &pdd.dual_r, pdd.rho);
    let n = coeff.elements();
    let mut phi_t = DVector::zeros(n);
    let mut phi_r = DVector::zeros(n);
    for i in 0..n {
        let v_t = c_t[i] * beta_t[i];
        let v_r = c_r[i] * beta_r[i];
        let [first, second] = phase_candidates(v_t, v_r);
        let obj = |(x, y): (f64, f64)| (v_t * Complex64::cis(x)).re + (v_r * Complex64::cis(y)).re;
        let best = if obj(second) < obj(first) { second } else { first };
        phi_t[i] = best.0;
        phi_r[i] = best.1;
    }
    (phi_t, phi_r)
}

/// Unit-modulus copy phases `pi - arg c_r` for the reflect-only surface.
pub fn update_ris_phases(coeff: &SurfaceCoefficients, pdd: &PddState) -> DVector<f64> {
    copy_coefficients(&coeff.theta_r, &pdd.dual_r, pdd.rho).map(|c| PI - arg0(c))
}
