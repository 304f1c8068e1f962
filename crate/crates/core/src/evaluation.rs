//! Objective values: effective gains, SINR-based rates, MSEs and the
//! augmented Lagrangian. The solver and every test read objective values from
//! here.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::geometry::Side;

/// Per-element transmission and reflection coefficients. A reflect-only
/// surface carries no transmission vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceCoefficients {
    pub theta_t: Option<DVector<Complex64>>,
    pub theta_r: DVector<Complex64>,
}

impl SurfaceCoefficients {
    pub fn star(theta_t: DVector<Complex64>, theta_r: DVector<Complex64>) -> Self {
        Self {
            theta_t: Some(theta_t),
            theta_r,
        }
    }

    pub fn ris(theta_r: DVector<Complex64>) -> Self {
        Self {
            theta_t: None,
            theta_r,
        }
    }

    pub fn side(&self, side: Side) -> Option<&DVector<Complex64>> {
        match side {
            Side::Reflection => Some(&self.theta_r),
            Side::Transmission => self.theta_t.as_ref(),
        }
    }

    pub fn elements(&self) -> usize {
        self.theta_r.len()
    }

    /// `max_n |beta_t^2 + beta_r^2 - 1|`, or 0 for a reflect-only surface.
    pub fn energy_split_residual(&self) -> f64 {
        match &self.theta_t {
            Some(t) => t
                .iter()
                .zip(self.theta_r.iter())
                .map(|(a, b)| (a.norm_sqr() + b.norm_sqr() - 1.0).abs())
                .fold(0.0, f64::max),
            None => 0.0,
        }
    }

    /// `max_n |cos(phi_t - phi_r)|`, or 0 for a reflect-only surface.
    pub fn coupling_residual(&self) -> f64 {
        match &self.theta_t {
            Some(t) => t
                .iter()
                .zip(self.theta_r.iter())
                .map(|(a, b)| (a.arg() - b.arg()).cos().abs())
                .fold(0.0, f64::max),
            None => 0.0,
        }
    }

    /// `max_n ||theta_r[n]| - 1|`.
    pub fn modulus_residual(&self) -> f64 {
        self.theta_r
            .iter()
            .map(|z| (z.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// BS precoding matrix, one column per user, powers in mW.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoders {
    pub w: DMatrix<Complex64>,
}

impl Precoders {
    /// `tr(W^H W)`.
    pub fn power(&self) -> f64 {
        self.w.iter().map(|z| z.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmmseState {
    pub weights: Vec<f64>,
    pub receivers: Vec<Complex64>,
}

/// Coefficient on the penalty norm in the augmented Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyForm {
    /// `1 / (2 rho)`: shrinking `rho` forces the copies together.
    #[default]
    Scaled,
    /// Fixed `1 / 2`.
    Literal,
}

impl PenaltyForm {
    pub fn weight(self, rho: f64) -> f64 {
        match self {
            PenaltyForm::Scaled => 0.5 / rho,
            PenaltyForm::Literal => 0.5,
        }
    }
}

/// Feasible auxiliary copy of one coefficient vector, kept in
/// amplitude/phase form.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxSide {
    pub amplitude: DVector<f64>,
    pub phase: DVector<f64>,
}

impl AuxSide {
    pub fn coefficients(&self) -> DVector<Complex64> {
        DVector::from_iterator(
            self.amplitude.len(),
            self.amplitude
                .iter()
                .zip(self.phase.iter())
                .map(|(&a, &p)| Complex64::from_polar(a, p)),
        )
    }
}

/// Auxiliary copies, duals and penalty factor of the PDD outer loop.
#[derive(Debug, Clone, PartialEq)]
pub struct PddState {
    pub aux_t: Option<AuxSide>,
    pub aux_r: AuxSide,
    pub dual_t: Option<DVector<Complex64>>,
    pub dual_r: DVector<Complex64>,
    pub rho: f64,
    pub penalty: PenaltyForm,
}

impl PddState {
    pub fn aux_coefficients(&self) -> SurfaceCoefficients {
        SurfaceCoefficients {
            theta_t: self.aux_t.as_ref().map(AuxSide::coefficients),
            theta_r: self.aux_r.coefficients(),
        }
    }

    pub fn penalty_weight(&self) -> f64 {
        self.penalty.weight(self.rho)
    }

    /// `||theta_aux - theta||_inf` over both sides.
    pub fn violation(&self, coeff: &SurfaceCoefficients) -> f64 {
        let aux = self.aux_coefficients();
        let side_max = |a: &DVector<Complex64>, b: &DVector<Complex64>| {
            a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
        };
        let mut v = side_max(&aux.theta_r, &coeff.theta_r);
        if let (Some(a), Some(b)) = (&aux.theta_t, &coeff.theta_t) {
            v = v.max(side_max(a, b));
        }
        v
    }
}

/// `g[k][j] = h_k^H diag(theta_i) H w_j` where `i` is user `k`'s side.
/// Users whose side has no coefficient vector see zero gain.
pub fn effective_gains(
    coeff: &SurfaceCoefficients,
    channels: &ChannelSet,
    precoders: &Precoders,
) -> Result<DMatrix<Complex64>> {
    let n = channels.elements();
    let k_users = channels.users();
    check_dim("effective_gains theta_r", n, coeff.theta_r.len())?;
    if let Some(t) = &coeff.theta_t {
        check_dim("effective_gains theta_t", n, t.len())?;
    }
    check_dim("effective_gains antennas", channels.antennas(), precoders.w.nrows())?;
    check_dim("effective_gains precoder columns", k_users, precoders.w.ncols())?;
    check_dim("effective_gains sides", k_users, channels.sides.len())?;

    let hw = &channels.h_br * &precoders.w;
    let mut g = DMatrix::zeros(k_users, k_users);
    for k in 0..k_users {
        let Some(theta) = coeff.side(channels.sides[k]) else {
            continue;
        };
        let v: DVector<Complex64> = channels.h_ru[k].map(|z| z.conj()).component_mul(theta);
        for j in 0..k_users {
            g[(k, j)] = v.iter().zip(hw.column(j).iter()).map(|(a, b)| a * b).sum();
        }
    }
    Ok(g)
}

fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            actual,
        })
    }
}

/// Signal-to-interference-plus-noise ratio of every user.
pub fn sinr(g: &DMatrix<Complex64>, noise: &[f64]) -> Vec<f64> {
    (0..g.nrows())
        .map(|k| {
            let signal = g[(k, k)].norm_sqr();
            let interference: f64 = (0..g.ncols())
                .filter(|&j| j != k)
                .map(|j| g[(k, j)].norm_sqr())
                .sum();
            signal / (interference + noise[k])
        })
        .collect()
}

/// Achievable rate of every user in bits/s/Hz.
pub fn user_rates(g: &DMatrix<Complex64>, noise: &[f64]) -> Vec<f64> {
    sinr(g, noise).into_iter().map(|s| (1.0 + s).log2()).collect()
}

pub fn sum_rate(g: &DMatrix<Complex64>, noise: &[f64]) -> f64 {
    user_rates(g, noise).iter().sum()
}

/// Mean-square error of every user for receivers `nu`:
/// `|nu_k|^2 (sum_j |g_kj|^2 + sigma_k^2) - 2 Re{nu_k g_kk} + 1`.
///
/// Evaluated as `|nu_k|^2 (sum_{j != k} |g_kj|^2 + sigma_k^2) + |1 - nu_k g_kk|^2`,
/// which avoids cancellation at high SNR.
pub fn mse_vector(g: &DMatrix<Complex64>, nu: &[Complex64], noise: &[f64]) -> Vec<f64> {
    (0..g.nrows())
        .map(|k| {
            let others: f64 = (0..g.ncols())
                .filter(|&j| j != k)
                .map(|j| g[(k, j)].norm_sqr())
                .sum();
            nu[k].norm_sqr() * (others + noise[k]) + (Complex64::new(1.0, 0.0) - nu[k] * g[(k, k)]).norm_sqr()
        })
        .collect()
}

/// `sum_i ||theta_aux_i - theta_i + rho lambda_i||^2` without the weight.
pub fn penalty_norm(coeff: &SurfaceCoefficients, pdd: &PddState) -> f64 {
    let side = |aux: &AuxSide, theta: &DVector<Complex64>, dual: &DVector<Complex64>| -> f64 {
        let aux = aux.coefficients();
        aux.iter()
            .zip(theta.iter())
            .zip(dual.iter())
            .map(|((a, t), l)| (a - t + l * pdd.rho).norm_sqr())
            .sum()
    };
    let mut total = side(&pdd.aux_r, &coeff.theta_r, &pdd.dual_r);
    if let (Some(aux), Some(theta), Some(dual)) = (&pdd.aux_t, &coeff.theta_t, &pdd.dual_t) {
        total += side(aux, theta, dual);
    }
    total
}

/// `sum_k w_k e_k + c(rho) sum_i ||theta_aux_i - theta_i + rho lambda_i||^2`.
pub fn augmented_objective(
    weights: &[f64],
    mse: &[f64],
    coeff: &SurfaceCoefficients,
    pdd: &PddState,
) -> f64 {
    let weighted: f64 = weights.iter().zip(mse).map(|(w, e)| w * e).sum();
    weighted + pdd.penalty_weight() * penalty_norm(coeff, pdd)
}

/// Augmented objective with the `-sum_k ln w_k` term of the WMMSE
/// reformulation. This is the quantity every block update minimizes, the
/// weight block included.
pub fn wmmse_objective(
    weights: &[f64],
    mse: &[f64],
    coeff: &SurfaceCoefficients,
    pdd: &PddState,
) -> f64 {
    augmented_objective(weights, mse, coeff, pdd) - weights.iter().map(|w| w.ln()).sum::<f64>()
}
