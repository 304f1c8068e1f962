//! Closed-form subproblem solutions against independent brute-force or
//! generic-solver oracles, plus channel statistics. Each check returns the
//! worst discrepancy it saw.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use aerosurf::channel::{directivity, pattern_gain, sample_rician, ChannelSet, RicianParams};
use aerosurf::evaluation::{AuxSide, PddState, PenaltyForm, Precoders, SurfaceCoefficients};
use aerosurf::geometry::Side;
use aerosurf::optimizer::{update_aux_amplitudes, update_aux_phases, update_precoders, update_surface_coeffs};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rand_c(rng: &mut ChaCha8Rng) -> Complex64 {
    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<Complex64> {
    DVector::from_fn(n, |_, _| rand_c(rng))
}

fn random_pdd(rng: &mut ChaCha8Rng, n: usize) -> (SurfaceCoefficients, PddState) {
    let coeff = SurfaceCoefficients::star(rand_vec(rng, n), rand_vec(rng, n));
    let split = DVector::from_fn(n, |_, _| rng.random_range(0.0..FRAC_PI_2));
    let phase_r = DVector::from_fn(n, |_, _| rng.random_range(0.0..TAU));
    let pdd = PddState {
        aux_t: Some(AuxSide {
            amplitude: split.map(f64::sin),
            phase: phase_r.map(|p| p + FRAC_PI_2),
        }),
        aux_r: AuxSide {
            amplitude: split.map(f64::cos),
            phase: phase_r,
        },
        dual_t: Some(rand_vec(rng, n)),
        dual_r: rand_vec(rng, n),
        rho: rng.random_range(0.05..2.0),
        penalty: PenaltyForm::Scaled,
    };
    (coeff, pdd)
}

/// `|b_t e^{j p_t} - theta_t + rho l_t|^2 + |b_r e^{j p_r} - theta_r + rho l_r|^2`
/// for one element, straight from the penalty term.
fn element_penalty(coeff: &SurfaceCoefficients, pdd: &PddState, n: usize, bt: f64, br: f64, pt: f64, pr: f64) -> f64 {
    let rho = pdd.rho;
    let tt = coeff.theta_t.as_ref().unwrap()[n];
    let lt = pdd.dual_t.as_ref().unwrap()[n];
    let t = Complex64::from_polar(bt, pt) - tt + lt * rho;
    let r = Complex64::from_polar(br, pr) - coeff.theta_r[n] + pdd.dual_r[n] * rho;
    t.norm_sqr() + r.norm_sqr()
}

/// Largest `|closed - grid|` of the per-element penalty, split angle on a
/// 1e-3 grid.
pub fn amplitude_gap(instances: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 4;
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (coeff, pdd) = random_pdd(&mut rng, n);
        let (bt, br) = update_aux_amplitudes(&coeff, &pdd, false);
        let pt = &pdd.aux_t.as_ref().unwrap().phase;
        let pr = &pdd.aux_r.phase;
        for i in 0..n {
            assert!((bt[i] * bt[i] + br[i] * br[i] - 1.0).abs() < 1e-15);
            let closed = element_penalty(&coeff, &pdd, i, bt[i], br[i], pt[i], pr[i]);
            let steps = (FRAC_PI_2 / 1e-3).ceil() as usize;
            let grid = (0..=steps)
                .map(|s| (s as f64 * 1e-3).min(FRAC_PI_2))
                .map(|psi| element_penalty(&coeff, &pdd, i, psi.sin(), psi.cos(), pt[i], pr[i]))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max((closed - grid).abs());
        }
    }
    worst
}

/// Largest `|closed - grid|` over phase pairs with a +-pi/2 offset on a
/// 1e-3 grid.
pub fn phase_gap(instances: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 4;
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (coeff, pdd) = random_pdd(&mut rng, n);
        let split = DVector::from_fn(n, |_, _| rng.random_range(0.0..FRAC_PI_2));
        let (bt, br) = (split.map(f64::sin), split.map(f64::cos));
        let (pt, pr) = update_aux_phases(&coeff, &pdd, &bt, &br);
        for i in 0..n {
            assert!((pt[i] - pr[i]).cos().abs() < 1e-12);
            let closed = element_penalty(&coeff, &pdd, i, bt[i], br[i], pt[i], pr[i]);
            let steps = (TAU / 1e-3).ceil() as usize;
            let mut grid = f64::INFINITY;
            for s in 0..steps {
                let phi = s as f64 * 1e-3;
                for offset in [FRAC_PI_2, -FRAC_PI_2] {
                    grid = grid.min(element_penalty(&coeff, &pdd, i, bt[i], br[i], phi, phi - offset));
                }
            }
            worst = worst.max((closed - grid).abs());
        }
    }
    worst
}

fn random_channels(rng: &mut ChaCha8Rng, n: usize, m: usize, sides: Vec<Side>) -> ChannelSet {
    let k = sides.len();
    ChannelSet {
        h_br: DMatrix::from_fn(n, m, |_, _| rand_c(rng)),
        h_ru: (0..k).map(|_| rand_vec(rng, n)).collect(),
        path_loss_bs: 1.0,
        path_loss_users: vec![1.0; k],
        sides,
    }
}

/// `sum_k w_k e_k(W)` evaluated directly from the channel products.
fn weighted_mse(channels: &ChannelSet, theta: &DVector<Complex64>, w: &DMatrix<Complex64>, weights: &[f64], nu: &[Complex64], noise: f64) -> f64 {
    let k_users = channels.users();
    let mut total = 0.0;
    for k in 0..k_users {
        let row = channels.h_ru[k].adjoint() * DMatrix::from_diagonal(theta) * &channels.h_br;
        let mut e = nu[k].norm_sqr() * noise + 1.0;
        for j in 0..k_users {
            let g = (&row * w.column(j))[(0, 0)];
            e += nu[k].norm_sqr() * g.norm_sqr();
            if j == k {
                e -= 2.0 * (nu[k] * g).re;
            }
        }
        total += weights[k] * e;
    }
    total
}

/// Largest relative weighted-MSE difference to accelerated projected
/// gradient (M=2, K=2).
pub fn precoder_gap(instances: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (n, m, k) = (3, 2, 2);
    let noise = 0.1;
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let channels = random_channels(&mut rng, n, m, vec![Side::Reflection; k]);
        let theta = DVector::from_fn(n, |_, _| Complex64::from_polar(1.0, rng.random_range(0.0..TAU)));
        let coeff = SurfaceCoefficients::ris(theta.clone());
        let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..3.0)).collect();
        let nu: Vec<Complex64> = (0..k).map(|_| rand_c(&mut rng)).collect();
        let p_max = rng.random_range(0.1..3.0);

        let closed = update_precoders(&channels, &coeff, &weights, &nu, p_max, 1e-12);
        let f_closed = weighted_mse(&channels, &theta, &closed.precoders.w, &weights, &nu, noise);
        assert!(closed.precoders.power() <= p_max * (1.0 + 1e-12));

        // Accelerated projected gradient on the Frobenius ball.
        let eff: Vec<DVector<Complex64>> = (0..k)
            .map(|u| (channels.h_ru[u].adjoint() * DMatrix::from_diagonal(&theta) * &channels.h_br).adjoint())
            .collect();
        let mut a = DMatrix::<Complex64>::zeros(m, m);
        for u in 0..k {
            a += &eff[u] * eff[u].adjoint() * c(weights[u] * nu[u].norm_sqr(), 0.0);
        }
        let lipschitz = a.clone().symmetric_eigenvalues().max();
        let project = |w: DMatrix<Complex64>| {
            let norm = w.norm();
            if norm * norm > p_max {
                w * c(p_max.sqrt() / norm, 0.0)
            } else {
                w
            }
        };
        let grad = |w: &DMatrix<Complex64>| {
            let mut g = &a * w;
            for u in 0..k {
                let col = g.column(u) - &eff[u] * (nu[u].conj() * weights[u]);
                g.set_column(u, &col);
            }
            g
        };
        let mut w = DMatrix::<Complex64>::zeros(m, k);
        let mut y = w.clone();
        let mut t = 1.0f64;
        for _ in 0..20000 {
            let next = project(&y - grad(&y) * c(1.0 / lipschitz, 0.0));
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &next + (&next - &w) * c((t - 1.0) / t_next, 0.0);
            w = next;
            t = t_next;
        }
        let f_oracle = weighted_mse(&channels, &theta, &w, &weights, &nu, noise);
        worst = worst.max((f_closed - f_oracle).abs() / f_oracle.abs().max(1.0));
    }
    worst
}

/// Independent least-squares form of the coefficient subproblem of one side:
/// rows `sqrt(w_k) nu_k a_kj^T` with targets `sqrt(w_k) delta_kj`, plus
/// `sqrt(c) I` rows with target `sqrt(c) (theta_aux + rho lambda)`.
fn least_squares_side(
    channels: &ChannelSet,
    precoders: &Precoders,
    weights: &[f64],
    nu: &[Complex64],
    side: Side,
    target: &DVector<Complex64>,
    c_pen: f64,
) -> DVector<Complex64> {
    let n = channels.elements();
    let k_users = channels.users();
    let members: Vec<usize> = (0..k_users).filter(|&k| channels.sides[k] == side).collect();
    let rows = members.len() * k_users + n;
    let mut a = DMatrix::<Complex64>::zeros(rows, n);
    let mut b = DVector::<Complex64>::zeros(rows);
    let hw = &channels.h_br * &precoders.w;
    let mut r = 0;
    for &k in &members {
        for j in 0..k_users {
            for i in 0..n {
                a[(r, i)] = channels.h_ru[k][i].conj() * hw[(i, j)] * nu[k] * weights[k].sqrt();
            }
            if j == k {
                b[r] = c(weights[k].sqrt(), 0.0);
            }
            r += 1;
        }
    }
    for i in 0..n {
        a[(r + i, i)] = c(c_pen.sqrt(), 0.0);
        b[r + i] = target[i] * c_pen.sqrt();
    }
    let qr = a.qr();
    let qtb = qr.q().adjoint() * b;
    qr.r().solve_upper_triangular(&qtb).unwrap()
}

/// Largest relative error of either side against a QR least-squares solve.
pub fn surface_gap(instances: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (n, m) = (4, 3);
    let mut worst = 0.0f64;
    for inst in 0..instances {
        let sides = match inst % 3 {
            0 => vec![Side::Reflection, Side::Transmission, Side::Reflection],
            1 => vec![Side::Transmission; 3],
            _ => vec![Side::Reflection, Side::Reflection, Side::Transmission],
        };
        let channels = random_channels(&mut rng, n, m, sides);
        let precoders = Precoders {
            w: DMatrix::from_fn(m, 3, |_, _| rand_c(&mut rng)),
        };
        let weights: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..3.0)).collect();
        let nu: Vec<Complex64> = (0..3).map(|_| rand_c(&mut rng)).collect();
        let (_, pdd) = random_pdd(&mut rng, n);
        let got = update_surface_coeffs(&channels, &precoders, &weights, &nu, &pdd);
        let c_pen = 0.5 / pdd.rho;
        for (side, aux, dual, theta) in [
            (Side::Reflection, &pdd.aux_r, &pdd.dual_r, &got.theta_r),
            (
                Side::Transmission,
                pdd.aux_t.as_ref().unwrap(),
                pdd.dual_t.as_ref().unwrap(),
                got.theta_t.as_ref().unwrap(),
            ),
        ] {
            let target = aux.coefficients() + dual * c(pdd.rho, 0.0);
            let oracle = least_squares_side(&channels, &precoders, &weights, &nu, side, &target, c_pen);
            worst = worst.max((theta - &oracle).norm() / oracle.norm());
        }
    }
    worst
}

/// Largest `|directivity(q) - 4 pi / integral|` for the given exponents.
pub fn directivity_gap(exponents: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for &q in exponents {
        // Composite Simpson over the front hemisphere; the azimuth integral is 2 pi.
        let steps = 20_000;
        let h = FRAC_PI_2 / steps as f64;
        let f = |t: f64| pattern_gain(t, q) * t.sin();
        let mut s = f(0.0) + f(FRAC_PI_2);
        for i in 1..steps {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let integral = 2.0 * PI * s * h / 3.0;
        let numeric = 4.0 * PI / integral;
        worst = worst.max((directivity(q) - numeric).abs());
    }
    worst
}

/// Largest relative deviation of the sample mean entry power from the path
/// loss over `draws` draws.
pub fn rician_power_gap(k_factors: &[f64], draws: usize) -> f64 {
    let mut worst = 0.0f64;
    for &k_factor in k_factors {
        let rho = 2.5;
        let los = DMatrix::from_fn(2, 2, |i, j| Complex64::from_polar(1.0, 0.7 * i as f64 - 1.3 * j as f64));
        let mut rng = ChaCha8Rng::seed_from_u64(15 + k_factor as u64);
        let mut power = DMatrix::<f64>::zeros(2, 2);
        for _ in 0..draws {
            let h = sample_rician(&RicianParams { k_factor, path_loss: rho }, &los, &mut rng);
            power += h.map(|z| z.norm_sqr());
        }
        for p in power.iter() {
            let mean = p / draws as f64;
            worst = worst.max((mean - rho).abs() / rho);
        }
    }
    worst
}
