//! Interaction-picture propagation of the truncated qubit-cavity state.
//!
//! The amplitudes obey
//!
//! ```text
//! i dC_{g,n}/dt = W_n e^{-i(-D0 t + Phi)} C_{e,n-1} + W_{n+1} e^{-i((2w - D0) t + Phi)} C_{e,n+1}
//! i dC_{e,n}/dt = W_{n+1} e^{+i(-D0 t + Phi)} C_{g,n+1} + W_n e^{+i((2w - D0) t + Phi)} C_{g,n-1}
//! ```
//!
//! with `W_n = lambda sqrt(n)`. The accumulated phase `Phi` is carried as an
//! extra component of the integrated vector so parametric pulses need no
//! separate quadrature.

mod integrator;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use integrator::{Dopri5, Tolerances};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::pulse::Pulse;
use crate::state::StateVector;

type C = Complex64;

/// Samples per swap time used when no explicit sample step is given.
pub const DEFAULT_SAMPLES_PER_SWAP_TIME: f64 = 2000.0;

/// Sampled observables of one propagation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub n_expect: Vec<f64>,
    pub norm: Vec<f64>,
    pub omega_q: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub(crate) fn push(&mut self, t: f64, n: f64, norm: f64, omega_q: f64) {
        self.times.push(t);
        self.n_expect.push(n);
        self.norm.push(norm);
        self.omega_q.push(omega_q);
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.norm
            .iter()
            .map(|n| (n - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_photon_number(&self) -> f64 {
        self.n_expect.iter().copied().fold(0.0, f64::max)
    }

    /// Appends `other`, dropping its first sample when it duplicates our last time.
    pub fn extend(&mut self, other: Trajectory) {
        let skip = match (self.times.last(), other.times.first()) {
            (Some(a), Some(b)) if b <= a => 1,
            _ => 0,
        };
        self.times.extend(other.times.into_iter().skip(skip));
        self.n_expect.extend(other.n_expect.into_iter().skip(skip));
        self.norm.extend(other.norm.into_iter().skip(skip));
        self.omega_q.extend(other.omega_q.into_iter().skip(skip));
    }
}

/// Integrator and guard settings for [`Propagator`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub atol: f64,
    pub rtol: f64,
    /// Samples per oscillation period of the fastest phase; bounds the step.
    pub steps_per_fast_period: f64,
    /// Largest tolerated population in the two highest Fock levels.
    pub tail_limit: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            atol: 1e-12,
            rtol: 1e-12,
            steps_per_fast_period: 50.0,
            tail_limit: 1e-8,
        }
    }
}

/// Time derivative of the amplitudes at time `t` and phase `phase`.
pub fn rhs(state: &StateVector, t: f64, phase: f64, params: &ModelParams) -> StateVector {
    let mut out = StateVector::zeros(state.n_max());
    let couplings = coupling_table(params);
    rhs_into(
        &state.c_g,
        &state.c_e,
        t,
        phase,
        params,
        &couplings,
        &mut out.c_g,
        &mut out.c_e,
    );
    out
}

/// `lambda sqrt(n)` for `n = 0..=n_max`.
fn coupling_table(params: &ModelParams) -> Vec<f64> {
    (0..=params.n_max)
        .map(|n| params.lambda * (n as f64).sqrt())
        .collect()
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn rhs_into(
    c_g: &[C],
    c_e: &[C],
    t: f64,
    phase: f64,
    params: &ModelParams,
    w: &[f64],
    d_g: &mut [C],
    d_e: &mut [C],
) {
    let top = c_g.len() - 1;
    let minus_i = C::new(0.0, -1.0);
    // rotating: exp(-i(-D0 t + Phi)); counter-rotating: exp(-i((2w - D0) t + Phi))
    let rot = C::from_polar(1.0, -(-params.delta0 * t + phase));
    let rot_c = rot.conj();
    let (rot_g, rot_e) = (minus_i * rot, minus_i * rot_c);
    if params.rwa {
        for n in 0..=top {
            let mut g = C::new(0.0, 0.0);
            let mut e = C::new(0.0, 0.0);
            if n > 0 {
                g = rot_g * (w[n] * c_e[n - 1]);
            }
            if n < top {
                e = rot_e * (w[n + 1] * c_g[n + 1]);
            }
            d_g[n] = g;
            d_e[n] = e;
        }
        return;
    }
    let ctr = C::from_polar(1.0, -(params.counter_rotating_frequency() * t + phase));
    let (ctr_g, ctr_e) = (minus_i * ctr, minus_i * ctr.conj());
    for n in 0..=top {
        let mut g = C::new(0.0, 0.0);
        let mut e = C::new(0.0, 0.0);
        if n > 0 {
            g += rot_g * (w[n] * c_e[n - 1]);
            e += ctr_e * (w[n] * c_g[n - 1]);
        }
        if n < top {
            g += ctr_g * (w[n + 1] * c_e[n + 1]);
            e += rot_e * (w[n + 1] * c_g[n + 1]);
        }
        d_g[n] = g;
        d_e[n] = e;
    }
}

/// Mean photon number of `state`.
pub fn photon_expectation(state: &StateVector) -> f64 {
    state.photon_expectation()
}

/// Propagates `state` from `t0` to `t1` with default options.
pub fn evolve(
    state: &StateVector,
    pulse: &Pulse,
    t0: f64,
    t1: f64,
    params: &ModelParams,
    sample_step: f64,
) -> Result<(StateVector, Trajectory)> {
    Propagator::new(*params).evolve(state, pulse, t0, t1, sample_step)
}

/// Propagator bound to fixed model parameters and options.
#[derive(Debug, Clone)]
pub struct Propagator {
    params: ModelParams,
    options: EvolveOptions,
    couplings: Vec<f64>,
}

impl Propagator {
    pub fn new(params: ModelParams) -> Self {
        Self::with_options(params, EvolveOptions::default())
    }

    pub fn with_options(params: ModelParams, options: EvolveOptions) -> Self {
        let couplings = coupling_table(&params);
        Self {
            params,
            options,
            couplings,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn options(&self) -> &EvolveOptions {
        &self.options
    }

    /// Default sampling step: the swap time divided by
    /// [`DEFAULT_SAMPLES_PER_SWAP_TIME`], or `1/2000` when `lambda = 0`.
    pub fn default_sample_step(&self) -> f64 {
        if self.params.lambda > 0.0 {
            self.params.swap_time() / DEFAULT_SAMPLES_PER_SWAP_TIME
        } else {
            1.0 / DEFAULT_SAMPLES_PER_SWAP_TIME
        }
    }

    pub fn evolve(
        &self,
        state: &StateVector,
        pulse: &Pulse,
        t0: f64,
        t1: f64,
        sample_step: f64,
    ) -> Result<(StateVector, Trajectory)> {
        let mut traj = Trajectory::default();
        let fin = self.evolve_observed(state, pulse, t0, t1, sample_step, |t, s| {
            traj.push(t, s.photon_expectation(), s.norm(), pulse.value(t));
        })?;
        Ok((fin, traj))
    }

    /// Like [`Propagator::evolve`], handing every sampled state to `observe`
    /// instead of recording a trajectory.
    pub fn evolve_observed<O>(
        &self,
        state: &StateVector,
        pulse: &Pulse,
        t0: f64,
        t1: f64,
        sample_step: f64,
        observe: O,
    ) -> Result<StateVector>
    where
        O: FnMut(f64, &StateVector),
    {
        self.evolve_filtered(state, pulse, t0, t1, sample_step, |_| true, observe)
    }

    /// Like [`Propagator::evolve_observed`], skipping grid times for which
    /// `keep` is false. Breakpoints are always observed and the integration
    /// itself is unaffected, so retained samples match the unfiltered run
    /// bitwise.
    #[allow(clippy::too_many_arguments)]
    pub fn evolve_filtered<K, O>(
        &self,
        state: &StateVector,
        pulse: &Pulse,
        t0: f64,
        t1: f64,
        sample_step: f64,
        keep: K,
        mut observe: O,
    ) -> Result<StateVector>
    where
        K: Fn(f64) -> bool,
        O: FnMut(f64, &StateVector),
    {
        let p = &self.params;
        if state.n_max() != p.n_max {
            return Err(Error::InvalidParameter(format!(
                "state truncation {} does not match n_max = {}",
                state.n_max(),
                p.n_max
            )));
        }
        if !(t1 > t0) {
            return Err(Error::InvalidParameter(format!(
                "need t1 > t0, got [{t0}, {t1}]"
            )));
        }
        if !(sample_step > 0.0) {
            return Err(Error::InvalidParameter(
                "sample_step must be positive".into(),
            ));
        }
        // domain checks
        pulse.eval(t0)?;
        pulse.eval(t1)?;

        let grid = sample_grid(t0, t1, sample_step, &pulse.breakpoints()).filtered(keep);
        let chains = Chains::occupied_by(state);
        let len = p.n_max + 1;
        let dim = chains.parities.len() * len;
        let mut y = Vec::with_capacity(dim + 1);
        for &g_even in &chains.parities {
            y.extend((0..len).map(|m| chain_site(state, g_even, m)));
        }
        y.push(C::new(pulse.accumulated_phase(t0, p.omega_q0)?, 0.0));

        let fast = p.counter_rotating_frequency().abs() + pulse.max_abs_detuning(p.omega_q0);
        let h_max = std::f64::consts::TAU / (self.options.steps_per_fast_period * fast.max(1e-3));
        let mut solver = Dopri5::new(
            dim + 1,
            Tolerances {
                atol: self.options.atol,
                rtol: self.options.rtol,
                h_max,
            },
        );

        let mut scratch = StateVector::zeros(p.n_max);
        let tail_limit = self.options.tail_limit;
        let n_max = p.n_max;
        let guard = |t: f64, y: &[C]| -> Result<()> {
            let tail: f64 = y[..dim]
                .chunks_exact(len)
                .map(|u| u[len - 2].norm_sqr() + u[len - 1].norm_sqr())
                .sum();
            if tail > tail_limit {
                return Err(Error::TruncationOverflow { t, tail, n_max });
            }
            Ok(())
        };
        let mut sample = |t: f64, y: &[C]| -> Result<()> {
            guard(t, y)?;
            chains.scatter(&y[..dim], &mut scratch);
            observe(t, &scratch);
            Ok(())
        };

        sample(grid.times[0], &y)?;
        let omega_q0 = p.omega_q0;
        let couplings = &self.couplings;
        for w in grid.intervals.windows(2) {
            let (a, b) = (grid.times[w[0]], grid.times[w[1]]);
            // the last two stages of a step share their time
            let mut last_value = (f64::NAN, 0.0);
            let rhs = |t: f64, y: &[C], dy: &mut [C]| {
                let phase = y[dim].re;
                let rates = PhaseRates::new(t, phase, p);
                for ((u, du), &g_even) in y[..dim]
                    .chunks_exact(len)
                    .zip(dy[..dim].chunks_exact_mut(len))
                    .zip(&chains.parities)
                {
                    chain_rhs(u, du, g_even, &rates, couplings);
                }
                // the value on [a, b) must not see the right-continuous jump at b
                let tq = if t >= b {
                    b - 1e-12 * (b - a)
                } else {
                    t.max(a)
                };
                if tq != last_value.0 {
                    last_value = (tq, pulse.value(tq));
                }
                dy[dim] = C::new(last_value.1 - omega_q0, 0.0);
            };
            solver.integrate_guarded(
                rhs,
                a,
                b,
                &mut y,
                &grid.times[w[0] + 1..=w[1]],
                &mut sample,
                guard,
            )?;
        }

        let mut fin = StateVector::zeros(p.n_max);
        chains.scatter(&y[..dim], &mut fin);
        Ok(fin)
    }
}

/// The Hamiltonian only couples `|g, n>` to `|e, n -+ 1>`, splitting the
/// basis into two independent chains `u_m`, `m = 0..=n_max`, whose sites
/// alternate between the qubit levels. A chain is labelled by whether `g`
/// sits on its even sites.
struct Chains {
    parities: Vec<bool>,
}

impl Chains {
    /// The chains carrying population in `state`, at least one.
    fn occupied_by(state: &StateVector) -> Self {
        let len = state.n_max() + 1;
        let occupied =
            |g_even: bool| (0..len).any(|m| chain_site(state, g_even, m) != C::new(0.0, 0.0));
        let mut parities: Vec<bool> = [true, false].into_iter().filter(|&g| occupied(g)).collect();
        if parities.is_empty() {
            parities.push(true);
        }
        Self { parities }
    }

    fn scatter(&self, y: &[C], out: &mut StateVector) {
        let len = out.n_max() + 1;
        if self.parities.len() == 1 {
            out.c_g.fill(C::new(0.0, 0.0));
            out.c_e.fill(C::new(0.0, 0.0));
        }
        for (u, &g_even) in y.chunks_exact(len).zip(&self.parities) {
            for (m, &v) in u.iter().enumerate() {
                if (m % 2 == 0) == g_even {
                    out.c_g[m] = v;
                } else {
                    out.c_e[m] = v;
                }
            }
        }
    }
}

fn chain_site(state: &StateVector, g_even: bool, m: usize) -> C {
    if m.is_multiple_of(2) == g_even {
        state.c_g[m]
    } else {
        state.c_e[m]
    }
}

/// `-i` times the rotating and counter-rotating phase factors at one instant.
struct PhaseRates {
    rot_g: C,
    rot_e: C,
    ctr_g: C,
    ctr_e: C,
}

impl PhaseRates {
    fn new(t: f64, phase: f64, params: &ModelParams) -> Self {
        let minus_i = C::new(0.0, -1.0);
        let rot = C::from_polar(1.0, -(-params.delta0 * t + phase));
        let (ctr_g, ctr_e) = if params.rwa {
            (C::new(0.0, 0.0), C::new(0.0, 0.0))
        } else {
            let ctr = C::from_polar(1.0, -(params.counter_rotating_frequency() * t + phase));
            (minus_i * ctr, minus_i * ctr.conj())
        };
        Self {
            rot_g: minus_i * rot,
            rot_e: minus_i * rot.conj(),
            ctr_g,
            ctr_e,
        }
    }
}

/// Derivative of one chain: a `g` site couples to its neighbours through
/// (rotating, counter-rotating) factors, an `e` site through the reverse.
#[inline]
fn chain_rhs(u: &[C], du: &mut [C], g_even: bool, r: &PhaseRates, w: &[f64]) {
    let top = u.len() - 1;
    for m in 0..=top {
        let left = if m > 0 {
            w[m] * u[m - 1]
        } else {
            C::new(0.0, 0.0)
        };
        let right = if m < top {
            w[m + 1] * u[m + 1]
        } else {
            C::new(0.0, 0.0)
        };
        du[m] = if (m % 2 == 0) == g_even {
            r.rot_g * left + r.ctr_g * right
        } else {
            r.ctr_e * left + r.rot_e * right
        };
    }
}

struct SampleGrid {
    times: Vec<f64>,
    /// Indices into `times` of the integration breakpoints, first and last included.
    intervals: Vec<usize>,
}

impl SampleGrid {
    fn filtered(self, keep: impl Fn(f64) -> bool) -> SampleGrid {
        let mut times = Vec::with_capacity(self.times.len());
        let mut intervals = Vec::with_capacity(self.intervals.len());
        let mut next = self.intervals.iter().peekable();
        for (i, &t) in self.times.iter().enumerate() {
            let is_break = next.peek() == Some(&&i);
            if is_break {
                next.next();
                intervals.push(times.len());
                times.push(t);
            } else if keep(t) {
                times.push(t);
            }
        }
        SampleGrid { times, intervals }
    }
}

/// Uniform grid with spacing at most `step`, merged with the pulse breakpoints.
fn sample_grid(t0: f64, t1: f64, step: f64, breakpoints: &[f64]) -> SampleGrid {
    let n = ((t1 - t0) / step).ceil().max(1.0) as usize;
    let h = (t1 - t0) / n as f64;
    let eps = 1e-9 * h;
    let inner: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > t0 + eps && b < t1 - eps)
        .collect();
    let mut times = Vec::with_capacity(n + 1 + inner.len());
    let mut intervals = vec![0];
    let mut bi = 0;
    for i in 0..=n {
        let t = if i == n { t1 } else { t0 + i as f64 * h };
        while bi < inner.len() && inner[bi] <= t + eps {
            let b = inner[bi];
            if (b - t).abs() > eps {
                times.push(b);
                intervals.push(times.len() - 1);
            } else {
                // breakpoint coincides with a grid point: snap the grid point
                times.push(b);
                intervals.push(times.len() - 1);
                bi += 1;
                break;
            }
            bi += 1;
        }
        if times.last().is_none_or(|&last| t - last > eps) {
            times.push(t);
        }
    }
    if *intervals.last().unwrap() != times.len() - 1 {
        intervals.push(times.len() - 1);
    }
    SampleGrid { times, intervals }
}
