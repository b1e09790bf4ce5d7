//! Strategy execution.

use std::path::Path;
use std::time::Instant;

use dce_core::dcrab::{dcrab_optimize, BasePulse, DcrabConfig};
use dce_core::protocols::{
    bangbang_optimize, evaluate_pulse, figure_of_merit, onoff_pulse, OFF_RESONANCE,
};
use dce_core::robustness::{
    default_delta_omegas, noise_average, quad_fit_weighted, systematic_sweep, QuadFit, SweepResult,
};
use dce_core::{
    HistoryEntry, ModelParams, Propagator, ProtocolWindow, Pulse, StateVector, Trajectory,
};
use serde::Serialize;

use crate::config::{BaseChoice, Resolved, RunConfig, Strategy};
use crate::{output, CliError};

#[derive(Debug, Serialize)]
pub struct RunResult {
    pub strategy: &'static str,
    pub model: ModelParams,
    pub window: ProtocolWindow,
    /// Absent when a simulated pulse does not cover the protocol window.
    pub f: Option<f64>,
    pub pulse: Pulse,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<HistoryEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<QuadFit>,
    pub seed: u64,
    /// Seconds.
    pub wall_time: f64,
    pub config: RunConfig,
}

fn onoff(r: &Resolved) -> Pulse {
    onoff_pulse(&r.window, r.params.omega, OFF_RESONANCE * r.params.omega)
}

fn dcrab(r: &Resolved) -> Result<dce_core::OptimizationResult, CliError> {
    let d = &r.config.dcrab;
    let base_pulse = match (d.base, &r.config.pulse) {
        (BaseChoice::Auto, Some(p)) => BasePulse::Explicit(p.clone()),
        (BaseChoice::Auto, None) | (BaseChoice::Onoff, _) => BasePulse::Onoff,
        (BaseChoice::Bangbang, _) => BasePulse::Bangbang(r.bangbang()),
    };
    let cfg = DcrabConfig {
        n_superiterations: d.n_superiterations,
        n_harmonics: d.n_harmonics,
        inner_max_evals: d.inner_max_evals,
        inner_tolerance: d.inner_tolerance,
        coeff_scale: d.coeff_scale,
        seed: r.config.seed,
        basis: d.basis,
        base_pulse,
    };
    Ok(dcrab_optimize(&r.params, &r.window, &cfg)?)
}

/// Pulse the robustness strategies study: the configured one, else a fresh
/// dCRAB optimization.
fn nominal_pulse(r: &Resolved) -> Result<(Pulse, Option<Vec<HistoryEntry>>), CliError> {
    match &r.config.pulse {
        Some(p) => Ok((p.clone(), None)),
        None => {
            let opt = dcrab(r)?;
            Ok((opt.best_pulse, Some(opt.history)))
        }
    }
}

/// Runs the strategy and writes the trajectory CSV and result JSON into `out_dir`.
pub fn execute(r: Resolved, out_dir: &Path) -> Result<RunResult, CliError> {
    let start = Instant::now();
    let prop = Propagator::new(r.params);
    let step = r.sample_step(prop.default_sample_step());
    let ground = StateVector::ground(r.params.n_max);
    let mut sweep = None;
    let mut fit = None;
    let mut history = None;

    let (pulse, traj, f) = match r.strategy {
        Strategy::Simulate => {
            let pulse = r.config.pulse.clone().unwrap_or_else(|| onoff(&r));
            let initial = match &r.config.initial {
                Some(s) => StateVector::basis(r.params.n_max, s.excited, s.n)
                    .map_err(|e| CliError::Config(format!("initial: {e}")))?,
                None => ground,
            };
            let (_, traj) = prop.evolve(&initial, &pulse, 0.0, pulse.duration(), step)?;
            let covers = (pulse.duration() - r.window.total()).abs() <= 1e-9 * r.window.total();
            let f = if covers {
                figure_of_merit(&traj, &r.window).ok()
            } else {
                None
            };
            (pulse, traj, f)
        }
        Strategy::Onoff => {
            let pulse = onoff(&r);
            let (f, traj) = full_run(&prop, &pulse, &r.window, step)?;
            (pulse, traj, Some(f))
        }
        Strategy::Bangbang => {
            let opt = bangbang_optimize(&r.params, &r.window, &r.bangbang())?;
            let (f, traj) = full_run(&prop, &opt.best_pulse, &r.window, step)?;
            history = Some(opt.history);
            (opt.best_pulse, traj, Some(f))
        }
        Strategy::Dcrab => {
            let opt = dcrab(&r)?;
            let (f, traj) = full_run(&prop, &opt.best_pulse, &r.window, step)?;
            history = Some(opt.history);
            (opt.best_pulse, traj, Some(f))
        }
        Strategy::RobustnessSystematic => {
            let (pulse, h) = nominal_pulse(&r)?;
            history = h;
            let lambdas = r.config.sweep.lambdas.clone().unwrap_or_else(|| {
                (0..13)
                    .map(|i| r.params.lambda - 0.03 + 0.005 * i as f64)
                    .collect()
            });
            let s = systematic_sweep(&pulse, &r.params, &lambdas, &r.window)?;
            sweep = Some(s);
            let (f, traj) = full_run(&prop, &pulse, &r.window, step)?;
            (pulse, traj, Some(f))
        }
        Strategy::RobustnessNoise => {
            let (pulse, h) = nominal_pulse(&r)?;
            history = h;
            let n = &r.config.noise;
            let grid = n
                .delta_omegas
                .clone()
                .unwrap_or_else(|| default_delta_omegas(r.params.omega));
            let s = noise_average(
                &pulse,
                &r.params,
                &r.window,
                &r.noise_spec(),
                &grid,
                n.n_realizations,
            )?;
            fit = match quad_fit_weighted(&s, n.fit) {
                Ok(q) => Some(q),
                Err(dce_core::Error::SingularDesign) => None,
                Err(e) if grid.len() < 3 => {
                    eprintln!("note: no quadratic fit: {e}");
                    None
                }
                Err(e) => return Err(e.into()),
            };
            sweep = Some(s);
            let (f, traj) = full_run(&prop, &pulse, &r.window, step)?;
            (pulse, traj, Some(f))
        }
    };

    output::write_atomic(
        &out_dir.join(&r.config.output.trajectory),
        &output::trajectory_csv(&traj)?,
    )?;
    let result = RunResult {
        strategy: r.strategy.name(),
        model: r.params,
        window: r.window,
        f,
        pulse,
        history,
        sweep,
        fit,
        seed: r.config.seed,
        wall_time: start.elapsed().as_secs_f64(),
        config: r.config.clone(),
    };
    let mut json = serde_json::to_string_pretty(&result).expect("result is serializable");
    json.push('\n');
    output::write_atomic(&out_dir.join(&r.config.output.result), json.as_bytes())?;
    Ok(result)
}

/// Scores `pulse` and samples its trajectory from `|g,0>` at `step`.
fn full_run(
    prop: &Propagator,
    pulse: &Pulse,
    window: &ProtocolWindow,
    step: f64,
) -> Result<(f64, Trajectory), CliError> {
    let (f, traj) = evaluate_pulse(prop, pulse, window)?;
    if step == prop.default_sample_step() {
        return Ok((f, traj));
    }
    let (_, out) = prop.evolve(
        &StateVector::ground(prop.params().n_max),
        pulse,
        0.0,
        window.total(),
        step,
    )?;
    Ok((f, out))
}
