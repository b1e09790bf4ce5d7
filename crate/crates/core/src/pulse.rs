//! The control field: the qubit frequency `omega_q(t)`.
//!
//! A pulse is either a piecewise-constant sequence of segments or a
//! piecewise base plus a smooth randomized-Fourier correction confined to a
//! manipulation window. Every evaluation is clamped at zero, and the
//! accumulated phase is always taken from the clamped value.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used to decide whether two segment boundaries coincide.
const BOUNDARY_EPS: f64 = 1e-12;

/// Absolute tolerance of the adaptive phase quadrature for parametric pulses.
const PHASE_QUAD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub omega_q: f64,
}

/// Contiguous constant segments covering `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piecewise {
    segments: Vec<Segment>,
}

impl Piecewise {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| Error::InvalidParameter("pulse needs at least one segment".into()))?;
        if first.t0 != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "first segment must start at 0, found {}",
                first.t0
            )));
        }
        let scale = segments.last().map_or(1.0, |s| s.t1.abs().max(1.0));
        for (i, s) in segments.iter().enumerate() {
            if !(s.t0.is_finite() && s.t1.is_finite() && s.omega_q.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "segment {i} has non-finite fields"
                )));
            }
            if s.t1 <= s.t0 {
                return Err(Error::InvalidParameter(format!(
                    "segment {i} is empty or reversed: [{}, {}]",
                    s.t0, s.t1
                )));
            }
        }
        for (i, w) in segments.windows(2).enumerate() {
            let gap = w[1].t0 - w[0].t1;
            if gap.abs() > BOUNDARY_EPS * scale {
                let what = if gap < 0.0 {
                    "overlaps"
                } else {
                    "leaves a gap after"
                };
                return Err(Error::InvalidParameter(format!(
                    "segment {} {what} segment {i} ({} vs {})",
                    i + 1,
                    w[1].t0,
                    w[0].t1
                )));
            }
        }
        let mut segments = segments;
        for i in 1..segments.len() {
            segments[i].t0 = segments[i - 1].t1;
        }
        Ok(Self { segments })
    }

    /// A single constant value over `[0, duration]`.
    pub fn constant(duration: f64, omega_q: f64) -> Result<Self> {
        Self::new(vec![Segment {
            t0: 0.0,
            t1: duration,
            omega_q,
        }])
    }

    /// Builds segments from switching times: `values[i]` holds on
    /// `[switches[i-1], switches[i])` with implicit `0` and `duration` ends.
    pub fn from_switches(duration: f64, switches: &[f64], values: &[f64]) -> Result<Self> {
        if values.len() != switches.len() + 1 {
            return Err(Error::InvalidParameter(
                "need exactly one more value than switching time".into(),
            ));
        }
        let mut edges = Vec::with_capacity(switches.len() + 2);
        edges.push(0.0);
        edges.extend_from_slice(switches);
        edges.push(duration);
        let segments = edges
            .windows(2)
            .zip(values)
            .map(|(e, &v)| Segment {
                t0: e[0],
                t1: e[1],
                omega_q: v,
            })
            .collect();
        Self::new(segments)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn duration(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t1)
    }

    fn index_at(&self, t: f64) -> usize {
        let i = self.segments.partition_point(|s| s.t1 <= t);
        i.min(self.segments.len() - 1)
    }

    /// Raw (unclamped) segment value, right-continuous at boundaries.
    pub fn raw_value(&self, t: f64) -> f64 {
        self.segments[self.index_at(t)].omega_q
    }

    /// Merges adjacent segments carrying identical values.
    pub fn simplified(&self) -> Self {
        let mut out: Vec<Segment> = Vec::with_capacity(self.segments.len());
        for s in &self.segments {
            match out.last_mut() {
                Some(last) if last.omega_q == s.omega_q => last.t1 = s.t1,
                _ => out.push(*s),
            }
        }
        Self { segments: out }
    }

    /// `int_0^t (max(0, omega_q) - omega_q0) dt'` in closed form.
    fn phase(&self, t: f64, omega_q0: f64) -> f64 {
        let mut acc = 0.0;
        for s in &self.segments {
            if s.t0 >= t {
                break;
            }
            let hi = s.t1.min(t);
            acc += (s.omega_q.max(0.0) - omega_q0) * (hi - s.t0);
        }
        acc
    }

    fn boundaries(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(0.0).chain(self.segments.iter().map(|s| s.t1))
    }
}

/// One randomized Fourier component; `freq` is an angular frequency in units
/// of `omega`, with phase origin at the start of the manipulation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub freq: f64,
    pub a: f64,
    pub b: f64,
}

/// Offset plus sine/cosine amplitudes over a frozen set of frequencies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BasisExpansion {
    pub harmonics: Vec<Harmonic>,
    pub offset: f64,
}

impl BasisExpansion {
    /// Builds an expansion from `frequencies` and the coefficient vector
    /// `[a_1, b_1, ..., a_K, b_K, offset]`.
    pub fn from_coefficients(frequencies: &[f64], coefficients: &[f64]) -> Result<Self> {
        if coefficients.len() != 2 * frequencies.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients for {} frequencies, got {}",
                2 * frequencies.len() + 1,
                frequencies.len(),
                coefficients.len()
            )));
        }
        let harmonics = frequencies
            .iter()
            .zip(coefficients.chunks_exact(2))
            .map(|(&freq, ab)| Harmonic {
                freq,
                a: ab[0],
                b: ab[1],
            })
            .collect();
        Ok(Self {
            harmonics,
            offset: coefficients[coefficients.len() - 1],
        })
    }

    /// Number of free coefficients (two per harmonic plus the offset).
    pub fn n_coefficients(&self) -> usize {
        2 * self.harmonics.len() + 1
    }

    /// Sum of two expansions over the same window.
    pub fn combined(&self, other: &BasisExpansion) -> BasisExpansion {
        let mut harmonics = self.harmonics.clone();
        harmonics.extend_from_slice(&other.harmonics);
        BasisExpansion {
            harmonics,
            offset: self.offset + other.offset,
        }
    }

    fn unshaped(&self, s: f64) -> f64 {
        self.harmonics.iter().fold(self.offset, |acc, h| {
            let (sin, cos) = (h.freq * s).sin_cos();
            acc + h.a * sin + h.b * cos
        })
    }

    fn amplitude_bound(&self) -> f64 {
        self.harmonics
            .iter()
            .fold(self.offset.abs(), |acc, h| acc + h.a.abs() + h.b.abs())
    }
}

/// Piecewise base plus a `sin^2`-shaped correction on `window`.
#[derive(Debug, Clone, PartialEq)]
pub struct Parametric {
    base: Piecewise,
    window: [f64; 2],
    expansion: BasisExpansion,
}

impl Parametric {
    pub fn new(base: Piecewise, window: [f64; 2], expansion: BasisExpansion) -> Result<Self> {
        let [w0, w1] = window;
        if !(w0.is_finite() && w1.is_finite() && 0.0 <= w0 && w0 < w1 && w1 <= base.duration()) {
            return Err(Error::InvalidParameter(format!(
                "manipulation window [{w0}, {w1}] not inside [0, {}]",
                base.duration()
            )));
        }
        let finite = expansion.offset.is_finite()
            && expansion
                .harmonics
                .iter()
                .all(|h| h.freq.is_finite() && h.a.is_finite() && h.b.is_finite());
        if !finite {
            return Err(Error::InvalidParameter(
                "non-finite basis coefficient".into(),
            ));
        }
        Ok(Self {
            base,
            window,
            expansion,
        })
    }

    pub fn base(&self) -> &Piecewise {
        &self.base
    }

    pub fn window(&self) -> [f64; 2] {
        self.window
    }

    pub fn expansion(&self) -> &BasisExpansion {
        &self.expansion
    }

    /// Shaped correction; identically zero at and outside the window edges.
    pub fn correction(&self, t: f64) -> f64 {
        let [w0, w1] = self.window;
        if t <= w0 || t >= w1 {
            return 0.0;
        }
        let s = t - w0;
        let shape = (PI * s / (w1 - w0)).sin().powi(2);
        shape * self.expansion.unshaped(s)
    }

    fn raw_value(&self, t: f64) -> f64 {
        self.base.raw_value(t) + self.correction(t)
    }

    fn phase(&self, t: f64, omega_q0: f64) -> f64 {
        // Outside the window the integrand is piecewise constant.
        let [w0, w1] = self.window;
        let mut cuts: Vec<f64> = self
            .base
            .boundaries()
            .chain([w0, w1])
            .filter(|&c| c < t)
            .collect();
        cuts.push(t);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let f = |x: f64| self.raw_value(x).max(0.0) - omega_q0;
        let n_pieces = (cuts.len() - 1).max(1) as f64;
        cuts.windows(2)
            .map(|c| {
                let (a, b) = (c[0], c[1]);
                if b <= w0 || a >= w1 {
                    f(0.5 * (a + b)) * (b - a)
                } else {
                    adaptive_simpson(&f, a, b, PHASE_QUAD_TOL / n_pieces)
                }
            })
            .sum()
    }
}

/// The qubit frequency control `omega_q(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PulseDoc", into = "PulseDoc")]
pub enum Pulse {
    Piecewise(Piecewise),
    Parametric(Parametric),
}

impl From<Piecewise> for Pulse {
    fn from(p: Piecewise) -> Self {
        Pulse::Piecewise(p)
    }
}

impl From<Parametric> for Pulse {
    fn from(p: Parametric) -> Self {
        Pulse::Parametric(p)
    }
}

impl Pulse {
    pub fn duration(&self) -> f64 {
        self.base().duration()
    }

    /// The piecewise-constant part of the pulse.
    pub fn base(&self) -> &Piecewise {
        match self {
            Pulse::Piecewise(p) => p,
            Pulse::Parametric(p) => &p.base,
        }
    }

    /// Unclamped value. No domain check.
    pub fn raw_value(&self, t: f64) -> f64 {
        match self {
            Pulse::Piecewise(p) => p.raw_value(t),
            Pulse::Parametric(p) => p.raw_value(t),
        }
    }

    /// Clamped value `max(0, raw)`. No domain check.
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        self.raw_value(t).max(0.0)
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.value(t))
    }

    /// `Phi(t) = int_0^t (omega_q(t') - omega_q0) dt'` over the clamped pulse.
    pub fn accumulated_phase(&self, t: f64, omega_q0: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(match self {
            Pulse::Piecewise(p) => p.phase(t, omega_q0),
            Pulse::Parametric(p) => p.phase(t, omega_q0),
        })
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let duration = self.duration();
        if !(0.0..=duration).contains(&t) {
            return Err(Error::OutOfDomain { t, duration });
        }
        Ok(())
    }

    /// Sorted times where the pulse may be discontinuous (including `0` and
    /// `T`). Integration is restarted at each of them.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.base().boundaries().collect();
        if let Pulse::Parametric(p) = self {
            b.extend(p.window);
            b.sort_by(f64::total_cmp);
            b.dedup();
        }
        b
    }

    /// Upper bound on `|omega_q(t) - omega_q0|` over the whole pulse.
    pub fn max_abs_detuning(&self, omega_q0: f64) -> f64 {
        let base_hi = self
            .base()
            .segments()
            .iter()
            .map(|s| s.omega_q)
            .fold(f64::NEG_INFINITY, f64::max);
        let extra = match self {
            Pulse::Piecewise(_) => 0.0,
            Pulse::Parametric(p) => p.expansion.amplitude_bound(),
        };
        let hi = (base_hi + extra).max(0.0);
        (hi - omega_q0).abs().max(omega_q0.abs())
    }

    /// Adds a seeded piecewise-constant noise realization (see [`NoiseSpec`]).
    pub fn apply_noise(&self, spec: &NoiseSpec, duration: f64) -> Result<Pulse> {
        spec.validate()?;
        if spec.delta_omega == 0.0 {
            return Ok(self.clone());
        }
        let realization = NoiseRealization::generate(spec, duration);
        let base = self.base();
        let mut edges: Vec<f64> = base.boundaries().chain(realization.edges()).collect();
        edges.sort_by(f64::total_cmp);
        let tol = BOUNDARY_EPS * duration.max(1.0);
        edges.dedup_by(|a, b| (*a - *b).abs() <= tol);
        let clamp = matches!(self, Pulse::Piecewise(_));
        let segments = edges
            .windows(2)
            .map(|e| {
                let mid = 0.5 * (e[0] + e[1]);
                let mut v = base.raw_value(mid);
                if spec.covers(mid) {
                    v += realization.value(mid);
                }
                Segment {
                    t0: e[0],
                    t1: e[1],
                    omega_q: if clamp { v.max(0.0) } else { v },
                }
            })
            .collect();
        let noisy = Piecewise::new(segments)?;
        Ok(match self {
            Pulse::Piecewise(_) => Pulse::Piecewise(noisy),
            Pulse::Parametric(p) => {
                Pulse::Parametric(Parametric::new(noisy, p.window, p.expansion.clone())?)
            }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pulse serialization is infallible")
    }

    pub fn from_json(doc: &str) -> Result<Pulse> {
        serde_json::from_str(doc).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Uniform plateau noise on the qubit frequency: a fresh value
/// `xi_k ~ U[-delta_omega, delta_omega]` on every interval of length
/// `tau_c * T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub delta_omega: f64,
    /// Correlation time as a fraction of the total duration.
    pub tau_c: f64,
    pub seed: u64,
    /// When set, noise is only added on `[start, end)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<[f64; 2]>,
}

impl NoiseSpec {
    pub fn new(delta_omega: f64, tau_c: f64, seed: u64) -> Self {
        Self {
            delta_omega,
            tau_c,
            seed,
            span: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_omega.is_finite() && self.delta_omega >= 0.0) {
            return Err(Error::InvalidParameter("delta_omega must be >= 0".into()));
        }
        if !(self.tau_c.is_finite() && self.tau_c > 0.0) {
            return Err(Error::InvalidParameter("tau_c must be > 0".into()));
        }
        Ok(())
    }

    fn covers(&self, t: f64) -> bool {
        self.span.is_none_or(|[a, b]| a <= t && t < b)
    }
}

/// Plateau values of one noise draw.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    pub plateau: f64,
    pub duration: f64,
    pub values: Vec<f64>,
}

impl NoiseRealization {
    pub fn generate(spec: &NoiseSpec, duration: f64) -> Self {
        let plateau = spec.tau_c * duration;
        let ratio = duration / plateau;
        let n = if (ratio - ratio.round()).abs() < 1e-9 {
            ratio.round()
        } else {
            ratio.ceil()
        } as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let d = spec.delta_omega;
        let values = (0..n.max(1))
            .map(|_| if d > 0.0 { rng.gen_range(-d..=d) } else { 0.0 })
            .collect();
        Self {
            plateau,
            duration,
            values,
        }
    }

    fn edges(&self) -> impl Iterator<Item = f64> + '_ {
        (1..self.values.len()).map(|k| k as f64 * self.plateau)
    }

    pub fn value(&self, t: f64) -> f64 {
        let k = ((t / self.plateau).floor().max(0.0) as usize).min(self.values.len() - 1);
        self.values[k]
    }
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    // Seed with a fixed split so a single oscillation cannot fool the first estimate.
    let pieces = 16;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == pieces { b } else { lo + h };
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            recurse(f, lo, hi, fa, fm, fb, whole, tol / pieces as f64, 40)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum PulseKind {
    Piecewise,
    Parametric,
}

/// On-disk pulse document. Segment lists are validated while they are read
/// so that errors carry a line and column.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PulseDoc {
    #[serde(rename = "type")]
    kind: PulseKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segments: Option<CheckedSegments>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base: Option<Box<PulseDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    window: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    harmonics: Option<Vec<Harmonic>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<f64>,
}

struct CheckedSegments(Piecewise);

impl Serialize for CheckedSegments {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.segments.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CheckedSegments {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct Visit;
        impl<'de> serde::de::Visitor<'de> for Visit {
            type Value = CheckedSegments;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a list of contiguous segments")
            }

            fn visit_seq<A: serde::de::SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<Self::Value, A::Error> {
                let mut segments = Vec::new();
                while let Some(s) = seq.next_element::<Segment>()? {
                    segments.push(s);
                }
                Piecewise::new(segments)
                    .map(CheckedSegments)
                    .map_err(serde::de::Error::custom)
            }
        }
        d.deserialize_seq(Visit)
    }
}

impl PulseDoc {
    fn piecewise(p: Piecewise) -> Self {
        Self {
            kind: PulseKind::Piecewise,
            segments: Some(CheckedSegments(p)),
            base: None,
            window: None,
            harmonics: None,
            offset: None,
        }
    }

    fn into_piecewise(self) -> Result<Piecewise> {
        let bad = |m: &str| Error::InvalidParameter(m.to_string());
        if self.kind != PulseKind::Piecewise {
            return Err(bad("expected a piecewise pulse"));
        }
        if self.base.is_some()
            || self.window.is_some()
            || self.harmonics.is_some()
            || self.offset.is_some()
        {
            return Err(bad("piecewise pulse takes only `segments`"));
        }
        self.segments
            .map(|s| s.0)
            .ok_or_else(|| bad("piecewise pulse needs `segments`"))
    }
}

impl TryFrom<PulseDoc> for Pulse {
    type Error = Error;

    fn try_from(doc: PulseDoc) -> Result<Self> {
        match doc.kind {
            PulseKind::Piecewise => Ok(Pulse::Piecewise(doc.into_piecewise()?)),
            PulseKind::Parametric => {
                let bad = |m: &str| Error::InvalidParameter(m.to_string());
                if doc.segments.is_some() {
                    return Err(bad("parametric pulse takes `base`, not `segments`"));
                }
                let base = doc
                    .base
                    .ok_or_else(|| bad("parametric pulse needs `base`"))?
                    .into_piecewise()?;
                let window = doc
                    .window
                    .ok_or_else(|| bad("parametric pulse needs `window`"))?;
                let expansion = BasisExpansion {
                    harmonics: doc.harmonics.unwrap_or_default(),
                    offset: doc.offset.unwrap_or(0.0),
                };
                Ok(Pulse::Parametric(Parametric::new(base, window, expansion)?))
            }
        }
    }
}

impl From<Pulse> for PulseDoc {
    fn from(p: Pulse) -> Self {
        match p {
            Pulse::Piecewise(p) => PulseDoc::piecewise(p),
            Pulse::Parametric(p) => PulseDoc {
                kind: PulseKind::Parametric,
                segments: None,
                base: Some(Box::new(PulseDoc::piecewise(p.base))),
                window: Some(p.window),
                harmonics: Some(p.expansion.harmonics),
                offset: Some(p.expansion.offset),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn onoff(tau: f64, total: f64) -> Pulse {
        Piecewise::from_switches(total, &[tau, total - tau], &[4.0, 1.0, 4.0])
            .unwrap()
            .into()
    }

    fn parametric() -> Pulse {
        let base = Piecewise::from_switches(10.0, &[2.0, 8.0], &[4.0, 1.0, 4.0]).unwrap();
        let expansion = BasisExpansion::from_coefficients(
            &[1.3, 2.9, 4.1],
            &[0.7, -0.4, 1.1, 0.2, -1.5, 0.3, -0.8],
        )
        .unwrap();
        Parametric::new(base, [2.0, 8.0], expansion).unwrap().into()
    }

    #[test]
    fn onoff_values() {
        let p = onoff(2.0, 10.0);
        assert_eq!(p.eval(1.0).unwrap(), 4.0);
        assert_eq!(p.eval(5.0).unwrap(), 1.0);
        assert_eq!(p.eval(9.5).unwrap(), 4.0);
        // right-continuous
        assert_eq!(p.eval(2.0).unwrap(), 1.0);
        assert_eq!(p.eval(8.0).unwrap(), 4.0);
        assert_eq!(p.eval(10.0).unwrap(), 4.0);
        assert!(matches!(p.eval(10.5), Err(Error::OutOfDomain { .. })));
        assert!(matches!(p.eval(-0.1), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn clamp_negative_raw() {
        let base = Piecewise::constant(4.0, 1.0).unwrap();
        let expansion = BasisExpansion {
            harmonics: vec![],
            offset: -1.3,
        };
        let p: Pulse = Parametric::new(base, [0.0, 4.0], expansion).unwrap().into();
        // raw = 1 - 1.3 at the window centre
        assert!((p.raw_value(2.0) + 0.3).abs() < 1e-12);
        assert_eq!(p.eval(2.0).unwrap(), 0.0);
    }

    #[test]
    fn phase_closed_form() {
        let p: Pulse = Piecewise::constant(5.0, 1.0).unwrap().into();
        assert_eq!(p.accumulated_phase(3.0, 1.0).unwrap(), 0.0);
        let p: Pulse = Piecewise::constant(5.0, 4.0).unwrap().into();
        assert_eq!(p.accumulated_phase(2.0, 1.0).unwrap(), 6.0);
        let p = onoff(2.0, 10.0);
        assert!((p.accumulated_phase(10.0, 1.0).unwrap() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn parametric_phase_matches_fine_trapezoid() {
        let p = parametric();
        let t = 7.3;
        // composite trapezoid on each smooth piece, independent of the adaptive path
        let f = |x: f64| p.value(x) - 1.0;
        let trapezoid = |a: f64, b: f64, n: usize| {
            let h = (b - a) / n as f64;
            let mut s = 0.5 * (f(a) + f(b));
            for i in 1..n {
                s += f(a + i as f64 * h);
            }
            s * h
        };
        let trap = 3.0 * 2.0 + trapezoid(2.0, t, 2_000_000);
        let got = p.accumulated_phase(t, 1.0).unwrap();
        // the base discontinuities fall on grid points only up to O(h)
        assert!((got - trap).abs() < 1e-9, "got {got}, trapezoid {trap}");
    }

    #[test]
    fn corrections_vanish_outside_window() {
        let p = parametric();
        for t in [0.0, 1.0, 2.0, 8.0, 9.0, 10.0] {
            assert_eq!(p.value(t), p.base().raw_value(t).max(0.0));
        }
        assert_ne!(p.value(5.0), 1.0);
    }

    #[test]
    fn noise_zero_width_is_identity() {
        let p = onoff(2.0, 10.0);
        let q = p.apply_noise(&NoiseSpec::new(0.0, 0.03, 7), 10.0).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn noise_plateau_count_and_determinism() {
        let spec = NoiseSpec::new(0.4, 0.03, 42);
        let r = NoiseRealization::generate(&spec, 37.7);
        assert_eq!(r.values.len(), 34);
        let p = onoff(7.54, 37.7);
        let a = p.apply_noise(&spec, 37.7).unwrap();
        let b = p.apply_noise(&spec, 37.7).unwrap();
        assert_eq!(a, b);
        let c = p
            .apply_noise(&NoiseSpec { seed: 43, ..spec }, 37.7)
            .unwrap();
        assert_ne!(a, c);
        for s in a.base().segments() {
            assert!(s.omega_q >= 0.0);
        }
    }

    #[test]
    fn noise_respects_span() {
        let spec = NoiseSpec {
            span: Some([2.0, 8.0]),
            ..NoiseSpec::new(0.4, 0.03, 1)
        };
        let p = onoff(2.0, 10.0).apply_noise(&spec, 10.0).unwrap();
        assert_eq!(p.value(1.0), 4.0);
        assert_eq!(p.value(9.0), 4.0);
        assert_ne!(p.value(5.0), 1.0);
    }

    #[test]
    fn noise_statistics() {
        let d = 0.4;
        let spec = NoiseSpec::new(d, 1e-4, 9);
        let r = NoiseRealization::generate(&spec, 1.0);
        assert_eq!(r.values.len(), 10_000);
        let n = r.values.len() as f64;
        let mean = r.values.iter().sum::<f64>() / n;
        let stderr = d / 3f64.sqrt() / n.sqrt();
        assert!(mean.abs() < 3.0 * stderr, "mean {mean}");
        assert!(r.values.iter().all(|x| x.abs() <= d));
    }

    #[test]
    fn document_round_trip() {
        for p in [onoff(2.0, 10.0), parametric()] {
            let doc = p.to_json();
            assert_eq!(Pulse::from_json(&doc).unwrap(), p);
        }
    }

    #[test]
    fn document_format() {
        let doc = r#"{"type":"parametric",
            "base":{"type":"piecewise","segments":[{"t0":0,"t1":1,"omega_q":4},{"t0":1,"t1":3,"omega_q":1},{"t0":3,"t1":4,"omega_q":4}]},
            "window":[1,3],"harmonics":[{"freq":2.5,"a":0.1,"b":-0.2}],"offset":0.05}"#;
        let p = Pulse::from_json(doc).unwrap();
        assert_eq!(p.breakpoints(), vec![0.0, 1.0, 3.0, 4.0]);
    }

    #[test]
    fn malformed_documents_rejected() {
        let overlapping = r#"{"type":"piecewise","segments":[
            {"t0":0,"t1":2,"omega_q":4},
            {"t0":1.5,"t1":3,"omega_q":1}]}"#;
        let err = Pulse::from_json(overlapping).unwrap_err();
        let Error::Parse(msg) = err else {
            panic!("{err:?}")
        };
        assert!(
            msg.contains("segment 1 overlaps") && msg.contains("line 3"),
            "{msg}"
        );

        assert!(Pulse::from_json(r#"{"type":"piecewise","segments":[]}"#).is_err());
        assert!(Pulse::from_json(r#"{"type":"piecewise","segments":[{"t0":0,"t1":1}]}"#).is_err());
        assert!(Pulse::from_json("{\"type\":\"wave\"}").is_err());
    }

    proptest! {
        #[test]
        fn phase_additivity(t1 in 0.0f64..10.0, dt in 0.0f64..10.0) {
            let p = parametric();
            let t2 = (t1 + dt).min(10.0);
            let direct = p.accumulated_phase(t2, 1.0).unwrap();
            let f = |x: f64| p.value(x) - 1.0;
            let piece = if t2 > t1 { adaptive_simpson(&f, t1, t2, 1e-13) } else { 0.0 };
            let split = p.accumulated_phase(t1, 1.0).unwrap() + piece;
            prop_assert!((direct - split).abs() < 1e-11);
        }

        #[test]
        fn clamp_is_idempotent(t in 0.0f64..10.0, off in -5.0f64..5.0) {
            let base = Piecewise::from_switches(10.0, &[2.0, 8.0], &[4.0, 1.0, 4.0]).unwrap();
            let e = BasisExpansion { harmonics: vec![Harmonic { freq: 2.0, a: 3.0, b: 0.0 }], offset: off };
            let p: Pulse = Parametric::new(base, [2.0, 8.0], e).unwrap().into();
            let v = p.eval(t).unwrap();
            prop_assert!(v >= 0.0);
            prop_assert_eq!(v.max(0.0), v);
        }

        #[test]
        fn json_round_trip_bitwise(coeffs in proptest::collection::vec(-3.0f64..3.0, 7)) {
            let base = Piecewise::from_switches(10.0, &[2.0, 8.0], &[4.0, 1.0, 4.0]).unwrap();
            let e = BasisExpansion::from_coefficients(&[0.3, 1.7, 2.2], &coeffs).unwrap();
            let p: Pulse = Parametric::new(base, [2.0, 8.0], e).unwrap().into();
            prop_assert_eq!(Pulse::from_json(&p.to_json()).unwrap(), p);
        }
    }
}
