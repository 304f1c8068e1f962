//! Weight and receiver blocks of the WMMSE reformulation.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::evaluation::sinr;

/// `w_k = 1 + SINR_k`.
pub fn update_weights(g: &DMatrix<Complex64>, noise: &[f64]) -> Vec<f64> {
    sinr(g, noise).into_iter().map(|s| 1.0 + s).collect()
}

/// MMSE receivers `nu_k = conj(g_kk) / (sum_j |g_kj|^2 + sigma_k^2)`, the
/// exact minimizer of each user's MSE.
pub fn update_receivers(g: &DMatrix<Complex64>, noise: &[f64]) -> Vec<Complex64> {
    (0..g.nrows())
        .map(|k| {
            let total: f64 = (0..g.ncols()).map(|j| g[(k, j)].norm_sqr()).sum::<f64>() + noise[k];
            g[(k, k)].conj() / total
        })
        .collect()
}
