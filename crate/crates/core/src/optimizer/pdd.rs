//! Dual and penalty schedule of the outer loop.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::evaluation::{PddState, SurfaceCoefficients};

/// Required shrink of the copy violation between outer iterations for a
/// dual step; otherwise the penalty factor is reduced.
pub const VIOLATION_DECREASE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterStep {
    Dual,
    Penalty,
}

/// Applies one outer update and returns which branch was taken together
/// with the violation `||theta_aux - theta||_inf` it was based on.
///
/// A dual step `lambda_i += (theta_aux_i - theta_i) / rho` happens when the
/// violation dropped to at most `0.9 * previous_violation`; otherwise `rho`
/// shrinks by `shrink` and the duals are left alone.
pub fn update_duals_penalty(
    pdd: &mut PddState,
    coeff: &SurfaceCoefficients,
    previous_violation: f64,
    shrink: f64,
) -> (OuterStep, f64) {
    let violation = pdd.violation(coeff);
    if violation <= VIOLATION_DECREASE * previous_violation {
        let aux = pdd.aux_coefficients();
        let inv_rho = Complex64::new(1.0 / pdd.rho, 0.0);
        let step = |dual: &mut DVector<Complex64>, a: &DVector<Complex64>, t: &DVector<Complex64>| {
            *dual += (a - t) * inv_rho;
        };
        step(&mut pdd.dual_r, &aux.theta_r, &coeff.theta_r);
        if let (Some(dual), Some(a), Some(t)) = (pdd.dual_t.as_mut(), &aux.theta_t, &coeff.theta_t) {
            step(dual, a, t);
        }
        (OuterStep::Dual, violation)
    } else {
        pdd.rho *= shrink;
        (OuterStep::Penalty, violation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{AuxSide, PenaltyForm};

    fn state(n: usize) -> (PddState, SurfaceCoefficients) {
        let aux = AuxSide {
            amplitude: DVector::from_element(n, std::f64::consts::FRAC_1_SQRT_2),
            phase: DVector::from_fn(n, |i, _| i as f64 * 0.3),
        };
        let aux_t = AuxSide {
            amplitude: aux.amplitude.clone(),
            phase: aux.phase.map(|p| p + std::f64::consts::FRAC_PI_2),
        };
        let pdd = PddState {
            aux_r: aux,
            aux_t: Some(aux_t),
            dual_r: DVector::from_element(n, Complex64::new(0.1, -0.2)),
            dual_t: Some(DVector::from_element(n, Complex64::new(0.0, 0.3))),
            rho: 0.5,
            penalty: PenaltyForm::Scaled,
        };
        let coeff = pdd.aux_coefficients();
        (pdd, coeff)
    }

    #[test]
    fn zero_residual_leaves_duals() {
        let (mut pdd, coeff) = state(4);
        let before = pdd.clone();
        let (step, v) = update_duals_penalty(&mut pdd, &coeff, f64::INFINITY, 0.7);
        assert_eq!(step, OuterStep::Dual);
        assert_eq!(v, 0.0);
        assert_eq!(pdd.dual_r, before.dual_r);
        assert_eq!(pdd.dual_t, before.dual_t);
    }

    #[test]
    fn stagnating_violation_shrinks_penalty() {
        let (mut pdd, mut coeff) = state(4);
        coeff.theta_r[0] += Complex64::new(0.2, 0.0);
        let duals = pdd.dual_r.clone();
        let (step, v) = update_duals_penalty(&mut pdd, &coeff, 0.2, 0.7);
        assert_eq!(step, OuterStep::Penalty);
        assert!((v - 0.2).abs() < 1e-12);
        assert!((pdd.rho - 0.35).abs() < 1e-15);
        assert_eq!(pdd.dual_r, duals);
    }

    #[test]
    fn dual_step_moves_towards_residual() {
        let (mut pdd, mut coeff) = state(3);
        coeff.theta_r[1] += Complex64::new(0.0, 0.1);
        let before = pdd.dual_r[1];
        update_duals_penalty(&mut pdd, &coeff, 1.0, 0.7);
        let expected = before + Complex64::new(0.0, -0.1) / 0.5;
        assert!((pdd.dual_r[1] - expected).norm() < 1e-12);
        assert_eq!(pdd.rho, 0.5);
    }
}
