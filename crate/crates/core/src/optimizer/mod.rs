//! Sum-rate maximization by WMMSE + block coordinate descent inside a
//! penalty dual decomposition (PDD) outer loop.
//!
//! Each inner cycle visits the blocks `{weights, receivers} -> W -> theta ->
//! copy amplitudes -> copy phases`, each solved exactly. The outer loop then
//! either takes a dual step or shrinks the penalty factor. A reflect-only
//! surface runs the same machinery with the copy amplitudes pinned to one.

pub mod auxiliary;
pub mod pdd;
pub mod precoder;
pub mod surface;
pub mod wmmse;

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::evaluation::{
    augmented_objective, effective_gains, mse_vector, sum_rate, user_rates, wmmse_objective, AuxSide,
    PddState, PenaltyForm, Precoders, SurfaceCoefficients, WmmseState,
};

pub use auxiliary::{update_aux_amplitudes, update_aux_phases, update_ris_phases};
pub use pdd::{update_duals_penalty, OuterStep};
pub use precoder::{update_precoders, PrecoderUpdate};
pub use surface::update_surface_coeffs;
pub use wmmse::{update_receivers, update_weights};

/// Which coefficient model the solver optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceMode {
    /// Reflect-only, unit-modulus coefficients.
    Ris,
    /// Energy-splitting transmit-and-reflect with coupled phases.
    Star,
}

impl fmt::Display for SurfaceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SurfaceMode::Ris => "ris",
            SurfaceMode::Star => "star",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Relative change of the objective over one inner cycle that ends BCD.
    pub inner_tolerance: f64,
    /// `||theta_aux - theta||_inf` target of the outer loop.
    pub violation_tolerance: f64,
    /// Penalty shrink factor in `(0, 1)`. With weights near the SNR the
    /// penalty has to fall by many orders of magnitude before the copies
    /// bind, so the default shrinks aggressively.
    pub penalty_shrink: f64,
    pub initial_penalty: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Relative tolerance on the power budget when the multiplier is active.
    pub bisection_tolerance: f64,
    /// Cross-check the amplitude closed form against a grid search.
    pub oracle_check: bool,
    pub penalty_form: PenaltyForm,
    /// WMMSE passes over `{weights, receivers} -> W` at the final feasible
    /// coefficients.
    pub polish_iterations: usize,
    /// Keep the objective after every block update in the diagnostics.
    pub record_blocks: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            inner_tolerance: 1e-4,
            violation_tolerance: 1e-4,
            penalty_shrink: 0.3,
            initial_penalty: 1.0,
            max_inner: 30,
            max_outer: 100,
            bisection_tolerance: 1e-10,
            oracle_check: false,
            penalty_form: PenaltyForm::Scaled,
            polish_iterations: 50,
            record_blocks: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("inner_tolerance", self.inner_tolerance),
            ("violation_tolerance", self.violation_tolerance),
            ("initial_penalty", self.initial_penalty),
            ("bisection_tolerance", self.bisection_tolerance),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("solver.{name} must be > 0, got {v}")));
            }
        }
        if !(self.penalty_shrink > 0.0 && self.penalty_shrink < 1.0) {
            return Err(Error::Config(format!(
                "solver.penalty_shrink must lie in (0, 1), got {}",
                self.penalty_shrink
            )));
        }
        if self.max_inner == 0 || self.max_outer == 0 {
            return Err(Error::Config("solver iteration caps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Current iterate of every block.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub precoders: Precoders,
    pub coeff: SurfaceCoefficients,
    pub wmmse: WmmseState,
    pub pdd: PddState,
}

/// Problem data shared by all block updates.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub channels: &'a ChannelSet,
    pub noise: &'a [f64],
    pub p_max: f64,
    pub mode: SurfaceMode,
}

impl Problem<'_> {
    /// `(wmmse objective, sum rate at theta)` of a state.
    pub fn evaluate(&self, state: &SolverState) -> Result<(f64, f64)> {
        let g = effective_gains(&state.coeff, self.channels, &state.precoders)?;
        let e = mse_vector(&g, &state.wmmse.receivers, self.noise);
        Ok((
            wmmse_objective(&state.wmmse.weights, &e, &state.coeff, &state.pdd),
            sum_rate(&g, self.noise),
        ))
    }
}

/// Checks collected while iterating.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Largest relative increase of the objective across a block update,
    /// `max((f_new - f_old) / max(|f_old|, 1))`, floored at 0.
    pub max_block_increase: f64,
    /// Largest `|sum_k log2 w_k - sum rate|` right after a weight update.
    pub max_wmmse_gap: f64,
    /// Objective after every block update, when requested.
    pub block_objectives: Vec<f64>,
}

impl Diagnostics {
    fn record(&mut self, before: f64, after: f64, keep: bool) {
        let rel = (after - before) / before.abs().max(1.0);
        self.max_block_increase = self.max_block_increase.max(rel);
        if keep {
            self.block_objectives.push(after);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOutcome {
    pub cycles: usize,
    pub converged: bool,
    pub objective: f64,
}

fn non_finite(outer: usize, inner: usize, state: &SolverState, value: f64) -> Error {
    Error::NonFinite {
        outer,
        inner,
        dump: format!(
            "objective={value}, rho={:e}, power={:e}, weights={:?}, |theta_r|={:e}",
            state.pdd.rho,
            state.precoders.power(),
            state.wmmse.weights,
            state.coeff.theta_r.norm()
        ),
    }
}

/// Block coordinate descent at fixed duals and penalty factor.
pub fn inner_bcd(
    state: &mut SolverState,
    problem: &Problem<'_>,
    opts: &SolverOptions,
    outer: usize,
    diag: &mut Diagnostics,
) -> Result<InnerOutcome> {
    let keep = opts.record_blocks;
    let (mut current, _) = problem.evaluate(state)?;
    if !current.is_finite() {
        return Err(non_finite(outer, 0, state, current));
    }
    let mut cycle_start = current;
    for cycle in 1..=opts.max_inner {
        let mut step = |state: &SolverState, diag: &mut Diagnostics| -> Result<()> {
            let (next, _) = problem.evaluate(state)?;
            if !next.is_finite() {
                return Err(non_finite(outer, cycle, state, next));
            }
            diag.record(current, next, keep);
            current = next;
            Ok(())
        };

        let g = effective_gains(&state.coeff, problem.channels, &state.precoders)?;
        state.wmmse.receivers = update_receivers(&g, problem.noise);
        state.wmmse.weights = update_weights(&g, problem.noise);
        let log_weights: f64 = state.wmmse.weights.iter().map(|w| w.log2()).sum();
        diag.max_wmmse_gap = diag
            .max_wmmse_gap
            .max((log_weights - user_rates(&g, problem.noise).iter().sum::<f64>()).abs());
        step(state, diag)?;

        state.precoders = update_precoders(
            problem.channels,
            &state.coeff,
            &state.wmmse.weights,
            &state.wmmse.receivers,
            problem.p_max,
            opts.bisection_tolerance,
        )
        .precoders;
        step(state, diag)?;

        state.coeff = update_surface_coeffs(
            problem.channels,
            &state.precoders,
            &state.wmmse.weights,
            &state.wmmse.receivers,
            &state.pdd,
        );
        step(state, diag)?;

        match problem.mode {
            SurfaceMode::Star => {
                let (beta_t, beta_r) = update_aux_amplitudes(&state.coeff, &state.pdd, opts.oracle_check);
                if let Some(aux) = state.pdd.aux_t.as_mut() {
                    aux.amplitude = beta_t;
                }
                state.pdd.aux_r.amplitude = beta_r;
                step(state, diag)?;

                let (phi_t, phi_r) = update_aux_phases(
                    &state.coeff,
                    &state.pdd,
                    &state.pdd.aux_t.as_ref().expect("star copies").amplitude,
                    &state.pdd.aux_r.amplitude,
                );
                if let Some(aux) = state.pdd.aux_t.as_mut() {
                    aux.phase = phi_t;
                }
                state.pdd.aux_r.phase = phi_r;
                step(state, diag)?;
            }
            SurfaceMode::Ris => {
                state.pdd.aux_r.phase = update_ris_phases(&state.coeff, &state.pdd);
                step(state, diag)?;
            }
        }

        let change = (cycle_start - current).abs() / cycle_start.abs().max(1.0);
        if change < opts.inner_tolerance {
            return Ok(InnerOutcome {
                cycles: cycle,
                converged: true,
                objective: current,
            });
        }
        cycle_start = current;
    }
    Ok(InnerOutcome {
        cycles: opts.max_inner,
        converged: false,
        objective: current,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
}

/// One outer iteration of the PDD loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub outer: usize,
    pub inner_cycles: usize,
    /// WMMSE objective (augmented Lagrangian with the `-ln w` term).
    pub objective: f64,
    /// Augmented Lagrangian `sum_k w_k e_k + penalty`.
    pub augmented: f64,
    /// Sum rate at the current `(W, theta)`.
    pub sum_rate: f64,
    /// Sum rate at `(W, theta_aux)`, which always satisfies the surface
    /// constraints.
    pub feasible_sum_rate: f64,
    pub violation: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `P_max - tr(W^H W)`.
    pub power_slack: f64,
    pub coupling: f64,
    pub energy_split: f64,
    pub modulus: f64,
    /// `||theta_aux - theta||_inf` at the last outer iteration.
    pub pdd_violation: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub status: SolveStatus,
    pub precoders: Precoders,
    pub coefficients: SurfaceCoefficients,
    pub user_rates: Vec<f64>,
    pub sum_rate: f64,
    pub trace: Vec<TraceEntry>,
    pub residuals: Residuals,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub diagnostics: Diagnostics,
}

/// Random feasible starting point: Gaussian precoders scaled to the full
/// budget, uniform phases, and an even energy split on a STAR surface.
pub fn initial_state(
    channels: &ChannelSet,
    p_max: f64,
    mode: SurfaceMode,
    opts: &SolverOptions,
    seed: u64,
) -> SolverState {
    let (n, m, k) = (channels.elements(), channels.antennas(), channels.users());
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    // Keep clear of the per-link streams used for channel draws.
    rng.set_stream(u64::MAX);
    let mut w = DMatrix::from_fn(m, k, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    });
    let norm = w.norm();
    if norm > 0.0 {
        w *= Complex64::new((p_max.sqrt() / norm) * (1.0 - 1e-12), 0.0);
    }
    let phases = DVector::from_fn(n, |_, _| rng.random_range(0.0..std::f64::consts::TAU));

    let (aux_r, aux_t) = match mode {
        SurfaceMode::Star => (
            AuxSide {
                amplitude: DVector::from_element(n, FRAC_1_SQRT_2),
                phase: phases.clone(),
            },
            Some(AuxSide {
                amplitude: DVector::from_element(n, FRAC_1_SQRT_2),
                phase: phases.map(|p| p + std::f64::consts::FRAC_PI_2),
            }),
        ),
        SurfaceMode::Ris => (
            AuxSide {
                amplitude: DVector::from_element(n, 1.0),
                phase: phases,
            },
            None,
        ),
    };
    let pdd = PddState {
        dual_t: aux_t.as_ref().map(|_| DVector::zeros(n)),
        dual_r: DVector::zeros(n),
        aux_t,
        aux_r,
        rho: opts.initial_penalty,
        penalty: opts.penalty_form,
    };
    SolverState {
        precoders: Precoders { w },
        coeff: pdd.aux_coefficients(),
        wmmse: WmmseState {
            weights: vec![1.0; k],
            receivers: vec![Complex64::new(0.0, 0.0); k],
        },
        pdd,
    }
}

/// WMMSE passes over `{weights, receivers} -> W` at fixed coefficients.
/// Never returns precoders with a lower sum rate than it was given.
pub fn refine_precoders(
    problem: &Problem<'_>,
    coeff: &SurfaceCoefficients,
    start: &Precoders,
    iterations: usize,
    bisection_tol: f64,
) -> Result<(Precoders, f64)> {
    let eff = precoder::effective_channels(coeff, problem.channels);
    let rate_of = |w: &Precoders| -> Result<f64> {
        Ok(sum_rate(&effective_gains(coeff, problem.channels, w)?, problem.noise))
    };
    let mut best = (start.clone(), rate_of(start)?);
    let mut current = start.clone();
    let mut last = best.1;
    for _ in 0..iterations {
        let g = effective_gains(coeff, problem.channels, &current)?;
        let nu = update_receivers(&g, problem.noise);
        let weights = update_weights(&g, problem.noise);
        current = precoder::solve_precoders(&eff, &weights, &nu, problem.p_max, bisection_tol).precoders;
        let rate = rate_of(&current)?;
        if rate > best.1 {
            best = (current.clone(), rate);
        }
        if (rate - last).abs() <= 1e-9 * rate.abs().max(1.0) {
            break;
        }
        last = rate;
    }
    Ok(best)
}

fn mode_matches(coeff: &SurfaceCoefficients, mode: SurfaceMode) -> bool {
    coeff.theta_t.is_some() == (mode == SurfaceMode::Star)
}

/// Maximizes the sum rate over precoders and surface coefficients.
///
/// The returned coefficients are the feasible copies, so the STAR energy
/// split and phase coupling (or the RIS unit modulus) hold to rounding. The
/// precoders are re-optimized for those coefficients before returning.
pub fn solve(
    config: &SystemConfig,
    channels: &ChannelSet,
    mode: SurfaceMode,
    opts: &SolverOptions,
    seed: u64,
) -> Result<OptimizationResult> {
    opts.validate()?;
    let noise = vec![config.noise_mw; channels.users()];
    let problem = Problem {
        channels,
        noise: &noise,
        p_max: config.p_max_mw,
        mode,
    };
    let mut state = initial_state(channels, config.p_max_mw, mode, opts, seed);
    debug_assert!(mode_matches(&state.coeff, mode));

    let mut diag = Diagnostics::default();
    let mut trace = Vec::new();
    let mut previous_violation = f64::INFINITY;
    let mut status = SolveStatus::MaxIterations;
    let mut inner_total = 0;
    let mut violation = f64::INFINITY;
    let mut best_feasible: Option<(f64, Precoders, SurfaceCoefficients)> = None;

    for outer in 1..=opts.max_outer {
        let inner = inner_bcd(&mut state, &problem, opts, outer, &mut diag)?;
        inner_total += inner.cycles;
        violation = state.pdd.violation(&state.coeff);

        let g = effective_gains(&state.coeff, channels, &state.precoders)?;
        let e = mse_vector(&g, &state.wmmse.receivers, &noise);
        let aux = state.pdd.aux_coefficients();
        let feasible_rate = sum_rate(&effective_gains(&aux, channels, &state.precoders)?, &noise);
        trace.push(TraceEntry {
            outer,
            inner_cycles: inner.cycles,
            objective: inner.objective,
            augmented: augmented_objective(&state.wmmse.weights, &e, &state.coeff, &state.pdd),
            sum_rate: sum_rate(&g, &noise),
            feasible_sum_rate: feasible_rate,
            violation,
            rho: state.pdd.rho,
        });
        if best_feasible.as_ref().is_none_or(|b| feasible_rate > b.0) {
            best_feasible = Some((feasible_rate, state.precoders.clone(), aux));
        }

        if violation <= opts.violation_tolerance && inner.converged {
            status = SolveStatus::Converged;
            break;
        }
        if outer < opts.max_outer {
            let (_, v) = update_duals_penalty(&mut state.pdd, &state.coeff, previous_violation, opts.penalty_shrink);
            previous_violation = v;
        }
    }

    let final_coeff = state.pdd.aux_coefficients();
    let (mut precoders, mut rate) = refine_precoders(
        &problem,
        &final_coeff,
        &state.precoders,
        opts.polish_iterations,
        opts.bisection_tolerance,
    )?;
    let mut coefficients = final_coeff;
    if status == SolveStatus::MaxIterations {
        if let Some((_, w, c)) = best_feasible {
            let (w, r) = refine_precoders(&problem, &c, &w, opts.polish_iterations, opts.bisection_tolerance)?;
            if r > rate {
                precoders = w;
                rate = r;
                coefficients = c;
            }
        }
    }

    let g = effective_gains(&coefficients, channels, &precoders)?;
    let rates = user_rates(&g, &noise);
    let residuals = Residuals {
        power_slack: config.p_max_mw - precoders.power(),
        coupling: coefficients.coupling_residual(),
        energy_split: coefficients.energy_split_residual(),
        modulus: match mode {
            SurfaceMode::Ris => coefficients.modulus_residual(),
            SurfaceMode::Star => 0.0,
        },
        pdd_violation: violation,
    };
    debug_assert!((rates.iter().sum::<f64>() - rate).abs() <= 1e-9 * rate.abs().max(1.0));
    Ok(OptimizationResult {
        status,
        precoders,
        coefficients,
        sum_rate: rates.iter().sum(),
        user_rates: rates,
        outer_iterations: trace.len(),
        inner_iterations: inner_total,
        trace,
        residuals,
        diagnostics: diag,
    })
}

/// Sum rate of equal-power matched-filter precoding with the starting
/// coefficients of [`initial_state`]. Reference point for solver output.
pub fn random_phase_baseline(
    config: &SystemConfig,
    channels: &ChannelSet,
    mode: SurfaceMode,
    seed: u64,
) -> Result<f64> {
    let opts = SolverOptions::default();
    let state = initial_state(channels, config.p_max_mw, mode, &opts, seed);
    let eff = precoder::effective_channels(&state.coeff, channels);
    let per_user = config.p_max_mw / channels.users() as f64;
    let mut w = DMatrix::zeros(channels.antennas(), channels.users());
    for (k, h) in eff.iter().enumerate() {
        let norm = h.norm();
        if norm > 0.0 {
            w.set_column(k, &(h * Complex64::new(per_user.sqrt() / norm, 0.0)));
        }
    }
    let noise = vec![config.noise_mw; channels.users()];
    let g = effective_gains(&state.coeff, channels, &Precoders { w })?;
    Ok(sum_rate(&g, &noise))
}
