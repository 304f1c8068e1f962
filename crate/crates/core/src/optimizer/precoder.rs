//! Precoder block: minimize `sum_k w_k e_k` over `W` subject to the total
//! power budget.
//!
//! The stationary point for multiplier `mu` is
//! `w_k = w_k conj(nu_k) (A + mu I)^-1 h_k` with
//! `A = sum_j w_j |nu_j|^2 h_j h_j^H` and `h_k = H^H diag(theta_i)^H h_{R,k}`.
//! Equivalently `W` solves a ridge regression in the rows
//! `sqrt(w_k) |nu_k| h_k^H`; it is computed by QR, and `mu` is the root of
//! the transmit power against the budget.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::evaluation::{Precoders, SurfaceCoefficients};

/// Singular values below this fraction of the largest count as zero.
const RANK_RTOL: f64 = 1e-15;
const MAX_BISECTION_STEPS: usize = 400;

#[derive(Debug, Clone)]
pub struct PrecoderUpdate {
    pub precoders: Precoders,
    pub mu: f64,
}

/// Effective BS-side channel `H^H diag(theta_i)^H h_{R,k}` of every user.
pub fn effective_channels(coeff: &SurfaceCoefficients, channels: &ChannelSet) -> Vec<DVector<Complex64>> {
    let m = channels.antennas();
    channels
        .h_ru
        .iter()
        .zip(&channels.sides)
        .map(|(h, side)| match coeff.side(*side) {
            Some(theta) => channels.h_br.adjoint() * theta.map(|z| z.conj()).component_mul(h),
            None => DVector::zeros(m),
        })
        .collect()
}

pub fn update_precoders(
    channels: &ChannelSet,
    coeff: &SurfaceCoefficients,
    weights: &[f64],
    receivers: &[Complex64],
    p_max: f64,
    bisection_tol: f64,
) -> PrecoderUpdate {
    let eff = effective_channels(coeff, channels);
    solve_precoders(&eff, weights, receivers, p_max, bisection_tol)
}

/// Same as [`update_precoders`] with the effective channels already formed.
pub fn solve_precoders(
    eff: &[DVector<Complex64>],
    weights: &[f64],
    receivers: &[Complex64],
    p_max: f64,
    bisection_tol: f64,
) -> PrecoderUpdate {
    let k_users = eff.len();
    let m = eff.first().map_or(0, |h| h.len());
    if m == 0 || k_users == 0 {
        return PrecoderUpdate {
            precoders: Precoders {
                w: DMatrix::zeros(m, k_users),
            },
            mu: 0.0,
        };
    }

    // Up to a constant the objective is the ridge regression
    // ||R W - E||_F^2 + mu ||W||_F^2 with R = (H S)^H, S = diag(sqrt(w_k) |nu_k|)
    // and E = diag(sqrt(w_k) e^{-j arg nu_k}). The singular values of R give
    // the transmit power as a function of mu; the final W comes from an
    // orthogonal factorization, which stays accurate when the weights span
    // many orders of magnitude.
    // Users whose scaled channel is negligible next to the strongest one
    // (typically a switched-off user with nu_k ~ 0) are left out; fitting
    // them would take unbounded power for no measurable gain.
    let row_norm: Vec<f64> = (0..k_users)
        .map(|k| weights[k].max(0.0).sqrt() * receivers[k].norm() * eff[k].norm())
        .collect();
    let strongest = row_norm.iter().cloned().fold(0.0, f64::max);
    let active: Vec<usize> = (0..k_users)
        .filter(|&k| row_norm[k] > RANK_RTOL * strongest)
        .collect();
    let n_active = active.len();
    if n_active == 0 {
        return PrecoderUpdate {
            precoders: Precoders {
                w: DMatrix::zeros(m, k_users),
            },
            mu: 0.0,
        };
    }
    let mut r = DMatrix::<Complex64>::zeros(n_active, m);
    let mut e = DVector::<Complex64>::zeros(n_active);
    for (row, &k) in active.iter().enumerate() {
        let magnitude = receivers[k].norm();
        r.set_row(row, &(eff[k].adjoint() * Complex64::new(weights[k].sqrt() * magnitude, 0.0)));
        e[row] = receivers[k].conj() / magnitude * weights[k].sqrt();
    }
    let rhs = DMatrix::from_diagonal(&e);

    let svd = r.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors");
    let v_t = svd.v_t.expect("right singular vectors");
    let sigma = svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<bool> = sigma
        .iter()
        .map(|&s| sigma_max > 0.0 && s > RANK_RTOL * sigma_max)
        .collect();
    let full_rank = keep.iter().all(|&k| k) && n_active <= m;

    let (mu, active_w) = if full_rank {
        ridge_on_factorization(&r, &rhs, p_max, bisection_tol, sigma_max)
    } else {
        // Truncated solve V diag(sigma / (sigma^2 + mu)) U^H E with mu from
        // the singular values.
        let row_energy: Vec<f64> = (u.adjoint() * &rhs)
            .row_iter()
            .map(|row| row.iter().map(|z| z.norm_sqr()).sum())
            .collect();
        let power = |mu: f64| -> f64 {
            (0..sigma.len())
                .filter(|&i| keep[i])
                .map(|i| row_energy[i] * (sigma[i] / (sigma[i] * sigma[i] + mu)).powi(2))
                .sum()
        };
        let mu = if power(0.0) <= p_max {
            0.0
        } else {
            // sigma / (sigma^2 + mu) <= 1 / (2 sqrt(mu)), so this bracket is feasible.
            let total: f64 = row_energy.iter().sum();
            let (mut lo, mut hi) = (0.0, total / (4.0 * p_max));
            for _ in 0..MAX_BISECTION_STEPS {
                if power(hi) >= p_max * (1.0 - bisection_tol) || hi - lo <= f64::EPSILON * hi {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if power(mid) > p_max {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        };
        let d = DVector::from_fn(sigma.len(), |i, _| {
            let value = if keep[i] { sigma[i] / (sigma[i] * sigma[i] + mu) } else { 0.0 };
            Complex64::new(value, 0.0)
        });
        let mut w = v_t.adjoint() * DMatrix::from_diagonal(&d) * u.adjoint() * &rhs;
        let p = w.norm_squared();
        if p > p_max {
            w *= Complex64::new((p_max / p).sqrt(), 0.0);
        }
        (mu, w)
    };

    let mut w = DMatrix::<Complex64>::zeros(m, k_users);
    for (col, &k) in active.iter().enumerate() {
        w.set_column(k, &active_w.column(col));
    }
    PrecoderUpdate {
        precoders: Precoders { w },
        mu,
    }
}

/// Solution of `min ||R W - E||^2 + mu ||W||^2` through a QR factorization
/// of `[R; sqrt(mu) I]`, together with `||T^-H W||^2` for the triangular
/// factor `T`, which is `-1/2` times the derivative of `||W||^2` in `mu`.
fn ridge_solve(r: &DMatrix<Complex64>, rhs: &DMatrix<Complex64>, mu: f64) -> (DMatrix<Complex64>, f64) {
    let (k, m) = r.shape();
    if mu == 0.0 {
        // Minimum-norm solution through R^H = Q T.
        let qr = r.adjoint().qr();
        let z = qr.r().adjoint().solve_lower_triangular(rhs).expect("full row rank");
        return (qr.q() * z, f64::INFINITY);
    }
    let mut stacked = DMatrix::<Complex64>::zeros(k + m, m);
    stacked.view_mut((0, 0), (k, m)).copy_from(r);
    for i in 0..m {
        stacked[(k + i, i)] = Complex64::new(mu.sqrt(), 0.0);
    }
    let mut target = DMatrix::<Complex64>::zeros(k + m, rhs.ncols());
    target.view_mut((0, 0), (k, rhs.ncols())).copy_from(rhs);
    let qr = stacked.qr();
    let t = qr.r();
    let w = t
        .solve_upper_triangular(&(qr.q().adjoint() * target))
        .expect("shifted system is nonsingular");
    let z = t.adjoint().solve_lower_triangular(&w).expect("shifted system is nonsingular");
    (w, z.norm_squared())
}

/// Multiplier and precoders meeting the power budget, located on the
/// factorized solution itself. Singular values of `R` from an iterative SVD
/// can be off by more than the budget tolerance in weak directions, so they
/// only seed the search. Newton steps on `1/||W(mu)|| - 1/sqrt(p_max)` are
/// safeguarded by a bracket.
fn ridge_on_factorization(
    r: &DMatrix<Complex64>,
    rhs: &DMatrix<Complex64>,
    p_max: f64,
    tol: f64,
    sigma_max: f64,
) -> (f64, DMatrix<Complex64>) {
    let (w0, _) = ridge_solve(r, rhs, 0.0);
    if w0.norm_squared() <= p_max {
        return (0.0, w0);
    }
    let radius = p_max.sqrt();
    let floor = f64::EPSILON * sigma_max * sigma_max;
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut best: Option<(f64, DMatrix<Complex64>)> = None;
    let mut mu = floor.max(f64::MIN_POSITIVE);
    for _ in 0..MAX_BISECTION_STEPS {
        let (w, zz) = ridge_solve(r, rhs, mu);
        let p = w.norm_squared();
        if p <= p_max {
            hi = mu;
            let done = p >= p_max * (1.0 - tol);
            best = Some((mu, w));
            if done {
                break;
            }
        } else {
            lo = mu;
        }
        if hi.is_finite() && hi - lo <= f64::EPSILON * hi {
            break;
        }
        let norm = p.sqrt();
        let newton = mu + (p / zz) * (norm - radius) / radius;
        mu = if newton > lo && newton < hi && newton.is_finite() {
            newton
        } else if hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            2.0 * mu.max(lo)
        };
    }
    best.unwrap_or_else(|| {
        let (w, _) = ridge_solve(r, rhs, hi);
        (hi, w)
    })
}
