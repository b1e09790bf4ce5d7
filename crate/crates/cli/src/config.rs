//! Run configuration: JSON document, dotted-path overrides and resolution
//! into core types.

use std::path::{Path, PathBuf};

use dce_core::dcrab::FrequencyBasis;
use dce_core::{BangBangConfig, ModelParams, NoiseSpec, ProtocolWindow, Pulse};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Simulate,
    Onoff,
    Bangbang,
    Dcrab,
    RobustnessSystematic,
    RobustnessNoise,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Simulate => "simulate",
            Strategy::Onoff => "onoff",
            Strategy::Bangbang => "bangbang",
            Strategy::Dcrab => "dcrab",
            Strategy::RobustnessSystematic => "robustness-systematic",
            Strategy::RobustnessNoise => "robustness-noise",
        }
    }
}

/// How times in the configuration are measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    /// Multiples of the swap time `pi / (2 lambda)`.
    #[default]
    SwapTimes,
    /// Units of `1 / omega`.
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub lambda: f64,
    #[serde(default = "one")]
    pub omega: f64,
    /// Reference detuning `omega - omega_q0`.
    #[serde(default)]
    pub delta0: f64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default)]
    pub rwa: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSection {
    #[serde(rename = "T")]
    pub total: f64,
    pub tau: f64,
}

impl Default for WindowSection {
    fn default() -> Self {
        Self {
            total: 20.0,
            tau: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BangBangSection {
    /// Off-resonance dwell, in configuration units.
    pub tau_off: f64,
    /// Defaults to `omega`.
    pub omega_on: Option<f64>,
    /// Defaults to `4 omega`.
    pub omega_off: Option<f64>,
    pub max_iterations: usize,
    pub prominence: f64,
}

impl Default for BangBangSection {
    fn default() -> Self {
        let core = BangBangConfig::default();
        Self {
            tau_off: 1.5,
            omega_on: None,
            omega_off: None,
            max_iterations: core.max_iterations,
            prominence: core.prominence,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseChoice {
    /// The configured `pulse` when present, otherwise the on-off pulse.
    #[default]
    Auto,
    Onoff,
    /// Result of the `bangbang` section.
    Bangbang,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DcrabSection {
    pub n_superiterations: usize,
    pub n_harmonics: usize,
    pub inner_max_evals: usize,
    pub inner_tolerance: f64,
    pub coeff_scale: f64,
    pub basis: FrequencyBasis,
    pub base: BaseChoice,
}

impl Default for DcrabSection {
    fn default() -> Self {
        let core = dce_core::dcrab::DcrabConfig::default();
        Self {
            n_superiterations: core.n_superiterations,
            n_harmonics: core.n_harmonics,
            inner_max_evals: core.inner_max_evals,
            inner_tolerance: core.inner_tolerance,
            coeff_scale: core.coeff_scale,
            basis: core.basis,
            base: BaseChoice::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct SweepSection {
    /// Coupling strengths; defaults to 13 points over `lambda +- 0.03`.
    pub lambdas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Noise amplitudes in units of `omega`; defaults to 9 points over `[0, 0.4]`.
    pub delta_omegas: Option<Vec<f64>>,
    /// Correlation time as a fraction of `T`.
    pub tau_c: f64,
    pub n_realizations: usize,
    /// Restricts the noise to `[a, b)`, in configuration units.
    pub span: Option<[f64; 2]>,
    pub fit: dce_core::robustness::FitWeighting,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            delta_omegas: None,
            tau_c: 0.03,
            n_realizations: 100,
            span: None,
            fit: Default::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    #[serde(default)]
    pub excited: bool,
    #[serde(default)]
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub trajectory: PathBuf,
    pub result: PathBuf,
    /// CSV sampling step in configuration units; defaults to the
    /// propagator's step.
    pub sample_step: Option<f64>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            trajectory: "trajectory.csv".into(),
            result: "result.json".into(),
            sample_step: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub units: Units,
    #[serde(default)]
    pub window: WindowSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    /// Pulse document with absolute times.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse: Option<Pulse>,
    /// Pulse document or the result JSON of an earlier run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialState>,
    #[serde(default)]
    pub bangbang: BangBangSection,
    #[serde(default)]
    pub dcrab: DcrabSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

fn default_n_max() -> usize {
    dce_core::params::DEFAULT_N_MAX
}

/// Sets `value` at the dotted `path`, creating objects along the way.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment.split_once('=').ok_or_else(|| {
        CliError::Config(format!(
            "override `{assignment}` is not of the form key=value"
        ))
    })?;
    if path.is_empty() {
        return Err(CliError::Config(format!(
            "override `{assignment}` has an empty key"
        )));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let obj = match node {
            Value::Object(map) => map,
            other if other.is_null() => {
                *other = Value::Object(Default::default());
                other.as_object_mut().expect("just set")
            }
            _ => {
                return Err(CliError::Config(format!(
                    "override `{path}`: `{}` is not an object",
                    keys[..i].join(".")
                )))
            }
        };
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj.entry(key.to_string()).or_insert(Value::Null);
    }
    unreachable!("loop returns on the last key")
}

/// Reads a configuration, accepting the result JSON of an earlier run in
/// place of a configuration (its embedded `config` is used).
pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let embedded = doc.get("config").is_some() && doc.get("wall_time").is_some();
    if embedded {
        doc = doc["config"].take();
    }
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let located = |e: serde_path_to_error::Error<serde_json::Error>| {
        let path_str = e.path().to_string();
        CliError::Config(format!(
            "{}: field `{path_str}`: {}",
            path.display(),
            e.inner()
        ))
    };
    if overrides.is_empty() && !embedded {
        // straight from the text, so diagnostics carry line and column
        let mut de = serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(&mut de).map_err(located)
    } else {
        serde_path_to_error::deserialize(doc).map_err(|e| {
            let path_str = e.path().to_string();
            CliError::Config(format!(
                "{}: field `{path_str}`: {}",
                path.display(),
                e.inner()
            ))
        })
    }
}

/// A configuration turned into core types.
pub struct Resolved {
    pub config: RunConfig,
    pub strategy: Strategy,
    pub params: ModelParams,
    pub window: ProtocolWindow,
    /// Factor turning configuration times into absolute times.
    pub time_unit: f64,
}

impl RunConfig {
    /// Validates and converts; inlines `pulse_file` so the stored config is
    /// self-contained.
    pub fn resolve(mut self, base_dir: &Path) -> Result<Resolved, CliError> {
        let strategy = self.strategy.ok_or_else(|| {
            CliError::Config("no strategy given in the config or on the command line".into())
        })?;
        let m = &self.model;
        let params = ModelParams::with_frame(m.omega, m.omega - m.delta0, m.lambda, m.n_max, m.rwa)
            .map_err(|e| CliError::Config(format!("model: {e}")))?;
        let time_unit = match self.units {
            Units::Absolute => 1.0,
            Units::SwapTimes => {
                let ts = params.swap_time();
                if !ts.is_finite() {
                    return Err(CliError::Config(
                        "units = swap_times needs lambda > 0; use units = absolute".into(),
                    ));
                }
                ts
            }
        };
        let window =
            ProtocolWindow::new(self.window.total * time_unit, self.window.tau * time_unit)
                .map_err(|e| CliError::Config(format!("window: {e}")))?;
        if let Some(file) = self.pulse_file.take() {
            if self.pulse.is_some() {
                return Err(CliError::Config(
                    "give either pulse or pulse_file, not both".into(),
                ));
            }
            let file = if file.is_absolute() {
                file
            } else {
                base_dir.join(file)
            };
            self.pulse = Some(read_pulse(&file)?);
        }
        if self
            .output
            .sample_step
            .is_some_and(|s| s.is_nan() || s <= 0.0)
        {
            return Err(CliError::Config(
                "output.sample_step must be positive".into(),
            ));
        }
        Ok(Resolved {
            config: RunConfig {
                strategy: Some(strategy),
                ..self
            },
            strategy,
            params,
            window,
            time_unit,
        })
    }
}

fn read_pulse(path: &Path) -> Result<Pulse, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read pulse file {}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("pulse file {}: {e}", path.display())))?;
    let pulse_doc = match doc.get("pulse") {
        Some(p) if doc.get("strategy").is_some() => p.to_string(),
        _ => text,
    };
    Pulse::from_json(&pulse_doc)
        .map_err(|e| CliError::Config(format!("pulse file {}: {e}", path.display())))
}

impl Resolved {
    pub fn bangbang(&self) -> BangBangConfig {
        let b = &self.config.bangbang;
        BangBangConfig {
            tau_off: b.tau_off * self.time_unit,
            omega_on: b.omega_on.unwrap_or(self.params.omega),
            omega_off: b
                .omega_off
                .unwrap_or(dce_core::protocols::OFF_RESONANCE * self.params.omega),
            max_iterations: b.max_iterations,
            prominence: b.prominence,
        }
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        let n = &self.config.noise;
        NoiseSpec {
            span: n
                .span
                .map(|[a, b]| [a * self.time_unit, b * self.time_unit]),
            ..NoiseSpec::new(0.0, n.tau_c, self.config.seed)
        }
    }

    pub fn sample_step(&self, default: f64) -> f64 {
        self.config
            .output
            .sample_step
            .map_or(default, |s| s * self.time_unit)
    }
}
