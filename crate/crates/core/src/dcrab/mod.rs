//! dCRAB pulse optimization.
//!
//! Each super-iteration draws a fresh set of randomized Fourier frequencies,
//! expands a correction to the current best pulse over that basis, and tunes
//! the `2K + 1` coefficients (sine and cosine amplitudes plus an offset) with
//! a Nelder-Mead search. The winning correction is folded into the base
//! before the next super-iteration, so later bases start from the best pulse
//! found so far.

mod simplex;

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use simplex::{nelder_mead, SimplexResult};

use crate::dynamics::Propagator;
use crate::error::{Error, Result};
use crate::outcome::{HistoryEntry, OptimizationResult};
use crate::params::ModelParams;
use crate::protocols::{evaluate_pulse, score_pulse, ProtocolWindow};
use crate::pulse::{BasisExpansion, Parametric, Piecewise, Pulse};

/// Objective value assigned to candidates whose propagation fails.
pub const FAILURE_PENALTY: f64 = -1e3;

/// How the randomized basis frequencies are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrequencyBasis {
    /// `2 pi k (1 + r_k) / tau_p` with `r_k ~ U[-1/2, 1/2]`, `k = 1..=K`:
    /// harmonics of the manipulation window.
    Window,
    /// `omega_k = lo + (hi - lo) (k - 1 + u_k) / K` with `u_k ~ U[0, 1)`:
    /// one frequency per equal-width sub-band of `[lo, hi]`, in units of
    /// `omega`.
    Band { lo: f64, hi: f64 },
}

impl FrequencyBasis {
    pub fn draw(&self, k: usize, tau_p: f64, rng: &mut impl Rng) -> Vec<f64> {
        match *self {
            FrequencyBasis::Window => (1..=k)
                .map(|i| TAU * i as f64 * (1.0 + rng.gen_range(-0.5..=0.5)) / tau_p)
                .collect(),
            FrequencyBasis::Band { lo, hi } => (0..k)
                .map(|i| lo + (hi - lo) * (i as f64 + rng.gen::<f64>()) / k as f64)
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let FrequencyBasis::Band { lo, hi } = *self {
            if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "frequency band [{lo}, {hi}] must satisfy 0 <= lo < hi"
                )));
            }
        }
        Ok(())
    }
}

/// Which pulse the first super-iteration expands around.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasePulse {
    /// The on-off pulse of the protocol window.
    Onoff,
    /// The result of the iterative bang-bang protocol.
    Bangbang(crate::protocols::BangBangConfig),
    /// An explicit pulse; a parametric pulse contributes its own expansion.
    Explicit(Pulse),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DcrabConfig {
    pub n_superiterations: usize,
    /// Harmonics per super-iteration.
    pub n_harmonics: usize,
    pub inner_max_evals: usize,
    /// Simplex spread on `f` (photons) at which an inner search stops.
    pub inner_tolerance: f64,
    /// Initial simplex edge, in units of `omega`.
    pub coeff_scale: f64,
    pub seed: u64,
    pub basis: FrequencyBasis,
    pub base_pulse: BasePulse,
}

impl Default for DcrabConfig {
    fn default() -> Self {
        Self {
            n_superiterations: 10,
            n_harmonics: 3,
            inner_max_evals: 400,
            inner_tolerance: 1e-4,
            coeff_scale: 0.5,
            seed: 0,
            basis: FrequencyBasis::Window,
            base_pulse: BasePulse::Onoff,
        }
    }
}

impl DcrabConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_harmonics == 0 || self.inner_max_evals == 0 {
            return Err(Error::InvalidParameter(
                "n_harmonics and inner_max_evals must be at least 1".into(),
            ));
        }
        if !(self.coeff_scale > 0.0 && self.coeff_scale.is_finite()) {
            return Err(Error::InvalidParameter(
                "coeff_scale must be positive".into(),
            ));
        }
        if !(self.inner_tolerance >= 0.0) {
            return Err(Error::InvalidParameter(
                "inner_tolerance must be >= 0".into(),
            ));
        }
        self.basis.validate()
    }
}

/// Resolves the starting pulse into a piecewise base plus an accumulated
/// expansion on the manipulation window.
fn resolve_base(
    params: &ModelParams,
    window: &ProtocolWindow,
    base: &BasePulse,
) -> Result<(Piecewise, BasisExpansion)> {
    let pulse = match base {
        BasePulse::Onoff => crate::protocols::onoff_pulse(
            window,
            params.omega,
            crate::protocols::OFF_RESONANCE * params.omega,
        ),
        BasePulse::Bangbang(cfg) => {
            crate::protocols::bangbang_optimize(params, window, cfg)?.best_pulse
        }
        BasePulse::Explicit(p) => p.clone(),
    };
    if (pulse.duration() - window.total()).abs() > 1e-9 * window.total() {
        return Err(Error::InvalidParameter(format!(
            "base pulse covers [0, {}] but the window needs [0, {}]",
            pulse.duration(),
            window.total()
        )));
    }
    match pulse {
        Pulse::Piecewise(p) => Ok((p, BasisExpansion::default())),
        Pulse::Parametric(p) => {
            let m = window.manipulation();
            if (p.window()[0] - m[0]).abs() > 1e-12 * window.total()
                || (p.window()[1] - m[1]).abs() > 1e-12 * window.total()
            {
                return Err(Error::InvalidParameter(
                    "parametric base pulse must use the protocol's manipulation window".into(),
                ));
            }
            Ok((p.base().clone(), p.expansion().clone()))
        }
    }
}

/// Assembles the candidate pulse for one coefficient vector.
fn candidate(
    base: &Piecewise,
    window: &ProtocolWindow,
    accumulated: &BasisExpansion,
    frequencies: &[f64],
    coefficients: &[f64],
) -> Result<Pulse> {
    let expansion = accumulated.combined(&BasisExpansion::from_coefficients(
        frequencies,
        coefficients,
    )?);
    Ok(Parametric::new(base.clone(), window.manipulation(), expansion)?.into())
}

/// Runs dCRAB, maximizing the figure of merit from `|g, 0>`.
pub fn dcrab_optimize(
    params: &ModelParams,
    window: &ProtocolWindow,
    cfg: &DcrabConfig,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    let propagator = Propagator::new(*params);
    dcrab_with(&propagator, window, cfg)
}

/// [`dcrab_optimize`] with an explicitly configured propagator.
pub fn dcrab_with(
    propagator: &Propagator,
    window: &ProtocolWindow,
    cfg: &DcrabConfig,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    let (base, mut accumulated) = resolve_base(propagator.params(), window, &cfg.base_pulse)?;
    let mut best_pulse: Pulse = if accumulated.harmonics.is_empty() && accumulated.offset == 0.0 {
        base.clone().into()
    } else {
        Parametric::new(base.clone(), window.manipulation(), accumulated.clone())?.into()
    };
    let (mut best_f, _) = evaluate_pulse(propagator, &best_pulse, window)?;
    let mut evaluations = 1usize;
    let mut history = vec![HistoryEntry {
        iteration: 0,
        evaluations,
        f: best_f,
        switch_time: None,
        budget_exhausted: false,
    }];

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_coeff = 2 * cfg.n_harmonics + 1;
    for s in 1..=cfg.n_superiterations {
        let frequencies = cfg.basis.draw(cfg.n_harmonics, window.tau_p(), &mut rng);
        // tracked here so the accepted coefficients are exactly the best evaluated point
        let mut inner_best: Option<(f64, Vec<f64>, Pulse)> = None;
        let objective = |x: &[f64]| -> f64 {
            let Ok(pulse) = candidate(&base, window, &accumulated, &frequencies, x) else {
                return FAILURE_PENALTY;
            };
            match score_pulse(propagator, &pulse, window) {
                Ok(f) => {
                    if inner_best.as_ref().is_none_or(|(b, _, _)| f > *b) {
                        inner_best = Some((f, x.to_vec(), pulse));
                    }
                    f
                }
                Err(_) => FAILURE_PENALTY,
            }
        };
        let result = nelder_mead(
            objective,
            &vec![0.0; n_coeff],
            cfg.coeff_scale,
            cfg.inner_max_evals,
            cfg.inner_tolerance,
        );
        evaluations += result.evaluations;
        if let Some((f, x, pulse)) = inner_best {
            if f > best_f {
                best_f = f;
                best_pulse = pulse;
                accumulated =
                    accumulated.combined(&BasisExpansion::from_coefficients(&frequencies, &x)?);
            }
        }
        history.push(HistoryEntry {
            iteration: s,
            evaluations,
            f: best_f,
            switch_time: None,
            budget_exhausted: !result.converged,
        });
    }

    Ok(OptimizationResult {
        best_pulse,
        best_f,
        history,
        seed: Some(cfg.seed),
    })
}
