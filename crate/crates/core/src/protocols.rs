//! Experiment timeline, figure of merit, and the on-off and iterative
//! bang-bang protocols.
//!
//! Every protocol starts from `|g, 0>`, keeps the qubit detuned during the
//! initial and final measurement windows of length `tau`, and scores a run by
//! the difference of time-averaged photon numbers in those windows.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Propagator, Trajectory};
use crate::error::{Error, Result};
use crate::outcome::{HistoryEntry, OptimizationResult};
use crate::params::ModelParams;
use crate::pulse::{Piecewise, Pulse};
use crate::state::StateVector;

/// Detuned qubit frequency, in units of `omega`.
pub const OFF_RESONANCE: f64 = 4.0;

/// Minimum number of samples required in each measurement window.
pub const MIN_WINDOW_SAMPLES: usize = 16;

/// Total duration `T` and measurement window `tau`; the manipulation span is
/// `T - 2 tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolWindow {
    #[serde(rename = "T")]
    total: f64,
    tau: f64,
}

impl ProtocolWindow {
    pub fn new(total: f64, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && total.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tau must be positive, got {tau}"
            )));
        }
        if !(total - 2.0 * tau > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "manipulation span T - 2 tau must be positive (T = {total}, tau = {tau})"
            )));
        }
        Ok(Self { total, tau })
    }

    /// Window with `T` and `tau` given in multiples of the swap time.
    pub fn in_swap_times(params: &ModelParams, total: f64, tau: f64) -> Result<Self> {
        let ts = params.swap_time();
        if !ts.is_finite() {
            return Err(Error::InvalidParameter(
                "swap time undefined for zero coupling".into(),
            ));
        }
        Self::new(total * ts, tau * ts)
    }

    /// `T = 20 tau_s`, `tau = 4 tau_s`.
    pub fn standard(params: &ModelParams) -> Result<Self> {
        Self::in_swap_times(params, 20.0, 4.0)
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn tau_p(&self) -> f64 {
        self.total - 2.0 * self.tau
    }

    /// `[tau, T - tau]`.
    pub fn manipulation(&self) -> [f64; 2] {
        [self.tau, self.total - self.tau]
    }
}

/// Time average of the linear interpolant of `(times, values)` over `[a, b]`,
/// plus the number of samples inside the interval.
fn window_average(times: &[f64], values: &[f64], a: f64, b: f64) -> (f64, usize) {
    let interp = |t: f64| {
        let i = times.partition_point(|&x| x < t);
        if i == 0 {
            return values[0];
        }
        if i == times.len() {
            return values[times.len() - 1];
        }
        let (t0, t1) = (times[i - 1], times[i]);
        let w = (t - t0) / (t1 - t0);
        values[i - 1] + w * (values[i] - values[i - 1])
    };
    let lo = times.partition_point(|&x| x <= a);
    let hi = times.partition_point(|&x| x < b);
    let inside = hi.saturating_sub(lo);
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(inside + 2);
    pts.push((a, interp(a)));
    pts.extend((lo..hi).map(|i| (times[i], values[i])));
    pts.push((b, interp(b)));
    let area: f64 = pts
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum();
    let count = times.iter().filter(|&&t| t >= a && t <= b).count();
    (area / (b - a), count)
}

/// `f = <n>_final - <n>_initial`, the difference of time-averaged photon
/// numbers over `[T - tau, T]` and `[0, tau]` (composite trapezoid).
pub fn figure_of_merit(traj: &Trajectory, window: &ProtocolWindow) -> Result<f64> {
    let (total, tau) = (window.total(), window.tau());
    if traj.is_empty() {
        return Err(Error::InsufficientSamples {
            start: 0.0,
            end: tau,
            found: 0,
            required: MIN_WINDOW_SAMPLES,
        });
    }
    let mut means = [0.0; 2];
    for (k, (a, b)) in [(0.0, tau), (total - tau, total)].into_iter().enumerate() {
        let (mean, found) = window_average(&traj.times, &traj.n_expect, a, b);
        if found < MIN_WINDOW_SAMPLES {
            return Err(Error::InsufficientSamples {
                start: a,
                end: b,
                found,
                required: MIN_WINDOW_SAMPLES,
            });
        }
        means[k] = mean;
    }
    Ok(means[1] - means[0])
}

/// `omega_off` on `[0, tau)`, `omega_on` on `[tau, T - tau)`, `omega_off` on `[T - tau, T]`.
pub fn onoff_pulse(window: &ProtocolWindow, omega_on: f64, omega_off: f64) -> Pulse {
    let [a, b] = window.manipulation();
    Piecewise::from_switches(window.total(), &[a, b], &[omega_off, omega_on, omega_off])
        .expect("a valid window always yields valid segments")
        .into()
}

/// Propagates `pulse` from `|g, 0>` over `[0, T]` and scores it.
pub fn evaluate_pulse(
    propagator: &Propagator,
    pulse: &Pulse,
    window: &ProtocolWindow,
) -> Result<(f64, Trajectory)> {
    let n_max = propagator.params().n_max;
    let (_, traj) = propagator.evolve(
        &StateVector::ground(n_max),
        pulse,
        0.0,
        window.total(),
        propagator.default_sample_step(),
    )?;
    let f = figure_of_merit(&traj, window)?;
    Ok((f, traj))
}

/// The figure of merit of [`evaluate_pulse`] without recording the
/// trajectory between the two averaging windows. Bitwise equal to it.
pub fn score_pulse(propagator: &Propagator, pulse: &Pulse, window: &ProtocolWindow) -> Result<f64> {
    let n_max = propagator.params().n_max;
    let step = propagator.default_sample_step();
    let (lo, hi) = (
        window.tau() + 2.0 * step,
        window.total() - window.tau() - 2.0 * step,
    );
    let mut traj = Trajectory::default();
    propagator.evolve_filtered(
        &StateVector::ground(n_max),
        pulse,
        0.0,
        window.total(),
        step,
        |t| t <= lo || t >= hi,
        |t, s| traj.push(t, s.photon_expectation(), s.norm(), 0.0),
    )?;
    figure_of_merit(&traj, window)
}

/// On-off protocol: resonance (`omega_q = omega`) on the manipulation span,
/// `4 omega` elsewhere.
pub fn run_onoff(params: &ModelParams, window: &ProtocolWindow) -> Result<(f64, Trajectory)> {
    let pulse = onoff_pulse(window, params.omega, OFF_RESONANCE * params.omega);
    evaluate_pulse(&Propagator::new(*params), &pulse, window)
}

/// First sampled local maximum of `<n>` strictly after `t_from` that rises
/// at least `prominence` above the minimum since the previous local maximum.
pub fn find_first_local_max(traj: &Trajectory, t_from: f64, prominence: f64) -> Option<(f64, f64)> {
    let (t, n) = (&traj.times, &traj.n_expect);
    if n.len() < 3 {
        return None;
    }
    let start = t.partition_point(|&x| x <= t_from).max(1);
    let mut valley = n[start - 1];
    for i in start..n.len() - 1 {
        valley = valley.min(n[i]);
        if n[i] > n[i - 1] && n[i] >= n[i + 1] {
            if n[i] - valley >= prominence {
                return Some((t[i], n[i]));
            }
            valley = n[i];
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BangBangConfig {
    /// Off-resonance dwell inserted at each detected maximum.
    pub tau_off: f64,
    pub omega_on: f64,
    pub omega_off: f64,
    pub max_iterations: usize,
    /// Minimum rise of a maximum above the preceding minimum, in photons.
    pub prominence: f64,
}

impl Default for BangBangConfig {
    fn default() -> Self {
        Self {
            tau_off: 1.0,
            omega_on: 1.0,
            omega_off: OFF_RESONANCE,
            max_iterations: 200,
            prominence: 1e-4,
        }
    }
}

impl BangBangConfig {
    /// Default settings with the dwell given in multiples of the swap time.
    pub fn with_dwell_in_swap_times(params: &ModelParams, dwell: f64) -> Self {
        Self {
            tau_off: dwell * params.swap_time(),
            omega_on: params.omega,
            omega_off: OFF_RESONANCE * params.omega,
            ..Self::default()
        }
    }

    pub fn validate(&self, window: &ProtocolWindow) -> Result<()> {
        if !(self.tau_off > 0.0 && self.tau_off < window.tau_p()) {
            return Err(Error::InvalidParameter(format!(
                "tau_off = {} must lie in (0, tau_p = {})",
                self.tau_off,
                window.tau_p()
            )));
        }
        if !(self.prominence >= 0.0) {
            return Err(Error::InvalidParameter("prominence must be >= 0".into()));
        }
        if !(self.omega_on >= 0.0 && self.omega_off >= 0.0) {
            return Err(Error::InvalidParameter(
                "bang-bang levels must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Bang-bang pulse with off-resonance dwells starting at `dwell_starts`.
pub fn bangbang_pulse(
    window: &ProtocolWindow,
    cfg: &BangBangConfig,
    dwell_starts: &[f64],
) -> Result<Pulse> {
    let [a, b] = window.manipulation();
    let mut switches = vec![a];
    let mut values = vec![cfg.omega_off, cfg.omega_on];
    for &t in dwell_starts {
        if t <= *switches.last().unwrap() || t >= b {
            return Err(Error::InvalidParameter(format!(
                "dwell start {t} out of order"
            )));
        }
        switches.push(t);
        values.push(cfg.omega_off);
        let back = t + cfg.tau_off;
        if back >= b {
            break;
        }
        switches.push(back);
        values.push(cfg.omega_on);
    }
    if *values.last().unwrap() == cfg.omega_on {
        switches.push(b);
        values.push(cfg.omega_off);
    }
    Ok(
        Piecewise::from_switches(window.total(), &switches, &values)?
            .simplified()
            .into(),
    )
}

/// Iterative bang-bang optimization: starting from the on-off pulse, insert
/// an off-resonance dwell of length `tau_off` at the first photon-number
/// maximum after the latest return to resonance, until that maximum falls
/// past `T - tau`.
pub fn bangbang_optimize(
    params: &ModelParams,
    window: &ProtocolWindow,
    cfg: &BangBangConfig,
) -> Result<OptimizationResult> {
    cfg.validate(window)?;
    let propagator = Propagator::new(*params);
    let end = window.total() - window.tau();
    let mut dwell_starts: Vec<f64> = Vec::new();
    let mut last_on = window.tau();
    let mut history = Vec::new();

    for iteration in 0..=cfg.max_iterations {
        let pulse = bangbang_pulse(window, cfg, &dwell_starts)?;
        let (f, traj) = evaluate_pulse(&propagator, &pulse, window)?;
        let peak = if last_on < end {
            find_first_local_max(&traj, last_on, cfg.prominence)
        } else {
            None
        };
        history.push(HistoryEntry {
            iteration,
            evaluations: iteration + 1,
            f,
            switch_time: peak.map(|p| p.0),
            budget_exhausted: false,
        });
        let next = match peak {
            Some((t_m, _)) if t_m < end && iteration < cfg.max_iterations => t_m,
            _ => {
                return Ok(OptimizationResult {
                    best_pulse: pulse,
                    best_f: f,
                    history,
                    seed: None,
                })
            }
        };
        dwell_starts.push(next);
        last_on = next + cfg.tau_off;
    }
    unreachable!("loop returns at max_iterations")
}
