//! Robustness of a fixed pulse against a miscalibrated coupling strength and
//! against piecewise-constant noise on the qubit frequency.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::Propagator;
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::protocols::{score_pulse, ProtocolWindow};
use crate::pulse::{NoiseSpec, Pulse};

/// Figure of merit sampled along one parameter axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Swept values: coupling strengths or noise amplitudes.
    pub axis: Vec<f64>,
    pub f_mean: Vec<f64>,
    pub f_stderr: Vec<f64>,
    pub n_realizations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// `f(x) = a - b x^2` with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadFit {
    pub a: f64,
    pub b: f64,
    pub a_err: f64,
    pub b_err: f64,
}

impl QuadFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.a - self.b * x * x
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitWeighting {
    #[default]
    Unweighted,
    /// Weights `1 / stderr^2`; requires every stderr to be positive.
    InverseVariance,
}

/// Nine noise amplitudes evenly spaced over `[0, 0.4] omega`.
pub fn default_delta_omegas(omega: f64) -> Vec<f64> {
    (0..9).map(|i| 0.05 * i as f64 * omega).collect()
}

/// Scores the fixed `pulse` at each coupling strength in `lambdas`.
pub fn systematic_sweep(
    pulse: &Pulse,
    params_ref: &ModelParams,
    lambdas: &[f64],
    window: &ProtocolWindow,
) -> Result<SweepResult> {
    if lambdas.is_empty() {
        return Err(Error::InvalidParameter("lambda grid is empty".into()));
    }
    let propagators = lambdas
        .iter()
        .map(|&l| params_ref.with_lambda(l).map(Propagator::new))
        .collect::<Result<Vec<_>>>()?;
    let f_mean = propagators
        .par_iter()
        .map(|prop| score_pulse(prop, pulse, window))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        axis: lambdas.to_vec(),
        f_stderr: vec![0.0; f_mean.len()],
        f_mean,
        n_realizations: 1,
        seed: None,
    })
}

/// Mean and standard error of `f` over `n_realizations` noisy copies of
/// `pulse` per amplitude in `delta_omegas`. `spec_base` supplies the
/// correlation time, the base seed and the optional span; its amplitude is
/// replaced by each grid value. A zero amplitude is scored once, noiselessly.
pub fn noise_average(
    pulse: &Pulse,
    params: &ModelParams,
    window: &ProtocolWindow,
    spec_base: &NoiseSpec,
    delta_omegas: &[f64],
    n_realizations: usize,
) -> Result<SweepResult> {
    if n_realizations < 2 {
        return Err(Error::InvalidParameter(
            "noise averaging needs at least 2 realizations".into(),
        ));
    }
    if delta_omegas.is_empty() {
        return Err(Error::InvalidParameter("noise grid is empty".into()));
    }
    for &d in delta_omegas {
        NoiseSpec {
            delta_omega: d,
            ..*spec_base
        }
        .validate()?;
    }
    let propagator = Propagator::new(*params);
    let noiseless = if delta_omegas.contains(&0.0) {
        Some(score_pulse(&propagator, pulse, window)?)
    } else {
        None
    };

    let jobs: Vec<(usize, usize)> = delta_omegas
        .iter()
        .enumerate()
        .filter(|(_, &d)| d != 0.0)
        .flat_map(|(i, _)| (0..n_realizations).map(move |r| (i, r)))
        .collect();
    let scores = jobs
        .par_iter()
        .map(|&(i, r)| {
            let spec = NoiseSpec {
                delta_omega: delta_omegas[i],
                seed: realization_seed(spec_base.seed, i, r),
                ..*spec_base
            };
            let noisy = pulse.apply_noise(&spec, window.total())?;
            score_pulse(&propagator, &noisy, window)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut f_mean = Vec::with_capacity(delta_omegas.len());
    let mut f_stderr = Vec::with_capacity(delta_omegas.len());
    let mut chunks = scores.chunks_exact(n_realizations);
    for &d in delta_omegas {
        if d == 0.0 {
            f_mean.push(noiseless.expect("scored above"));
            f_stderr.push(0.0);
        } else {
            let (mean, stderr) = mean_stderr(chunks.next().expect("one chunk per point"));
            f_mean.push(mean);
            f_stderr.push(stderr);
        }
    }
    Ok(SweepResult {
        axis: delta_omegas.to_vec(),
        f_mean,
        f_stderr,
        n_realizations,
        seed: Some(spec_base.seed),
    })
}

/// Seed of realization `realization` at grid point `point`.
pub fn realization_seed(base: u64, point: usize, realization: usize) -> u64 {
    base ^ splitmix64(splitmix64(point as u64) ^ realization as u64)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Pairwise summation, fixed order.
fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 8 {
        return x.iter().sum();
    }
    let (l, r) = x.split_at(x.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}

fn mean_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = pairwise_sum(x) / n;
    let dev: Vec<f64> = x.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares fit of `f = a - b x^2` to a sweep.
pub fn quad_fit(sweep: &SweepResult) -> Result<QuadFit> {
    quad_fit_weighted(sweep, FitWeighting::Unweighted)
}

pub fn quad_fit_weighted(sweep: &SweepResult, weighting: FitWeighting) -> Result<QuadFit> {
    let n = sweep.axis.len();
    if sweep.f_mean.len() != n || sweep.f_stderr.len() != n {
        return Err(Error::InvalidParameter(
            "sweep columns differ in length".into(),
        ));
    }
    let weights: Vec<f64> = match weighting {
        FitWeighting::Unweighted => vec![1.0; n],
        FitWeighting::InverseVariance => {
            if sweep.f_stderr.iter().any(|&s| !(s > 0.0)) {
                return Err(Error::InvalidParameter(
                    "inverse-variance weighting needs positive stderr at every point".into(),
                ));
            }
            sweep.f_stderr.iter().map(|s| 1.0 / (s * s)).collect()
        }
    };
    let z: Vec<f64> = sweep.axis.iter().map(|x| -x * x).collect();
    let wsum = |g: &dyn Fn(usize) -> f64| {
        pairwise_sum(&(0..n).map(|i| weights[i] * g(i)).collect::<Vec<_>>())
    };
    let s0 = wsum(&|_| 1.0);
    let s1 = wsum(&|i| z[i]);
    let s2 = wsum(&|i| z[i] * z[i]);
    let t0 = wsum(&|i| sweep.f_mean[i]);

    // normal equations of the design (1, z); centering keeps them well conditioned
    let zbar = s1 / s0;
    let szz = wsum(&|i| (z[i] - zbar) * (z[i] - zbar));
    if !(szz > 1e-14 * s2.max(f64::MIN_POSITIVE)) || n < 2 {
        return Err(Error::SingularDesign);
    }
    if n < 3 {
        return Err(Error::InvalidParameter(
            "a quadratic fit needs at least 3 points".into(),
        ));
    }
    let fbar = t0 / s0;
    let szf = wsum(&|i| (z[i] - zbar) * (sweep.f_mean[i] - fbar));
    let slope = szf / szz;
    let a = fbar - slope * zbar;

    let rss = wsum(&|i| {
        let r = sweep.f_mean[i] - a - slope * z[i];
        r * r
    });
    let sigma2 = rss / (n as f64 - 2.0);
    let var_slope = sigma2 / szz;
    let var_a = sigma2 * (1.0 / s0 + zbar * zbar / szz);
    Ok(QuadFit {
        a,
        b: slope,
        a_err: var_a.sqrt(),
        b_err: var_slope.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{onoff_pulse, run_onoff};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sweep(axis: Vec<f64>, f: Vec<f64>) -> SweepResult {
        let n = axis.len();
        SweepResult {
            axis,
            f_mean: f,
            f_stderr: vec![0.0; n],
            n_realizations: 1,
            seed: None,
        }
    }

    #[test]
    fn exact_quadratic_recovered() {
        let x: Vec<f64> = (0..9).map(|i| 0.05 * i as f64).collect();
        let f = x.iter().map(|x| 2.0 - 0.5 * x * x).collect();
        let fit = quad_fit(&sweep(x, f)).unwrap();
        assert!((fit.a - 2.0).abs() < 1e-14, "{fit:?}");
        assert!((fit.b - 0.5).abs() < 1e-12, "{fit:?}");
        assert!(fit.a_err < 1e-13 && fit.b_err < 1e-12);
    }

    #[test]
    fn degenerate_designs() {
        assert!(matches!(
            quad_fit(&sweep(vec![-0.2, 0.2], vec![1.0, 1.1])),
            Err(Error::SingularDesign)
        ));
        assert!(matches!(
            quad_fit(&sweep(vec![0.3; 5], vec![1.0; 5])),
            Err(Error::SingularDesign)
        ));
        assert!(quad_fit(&sweep(vec![0.1, 0.2], vec![1.0, 0.9])).is_err());
    }

    #[test]
    fn fit_is_order_invariant() {
        let x: Vec<f64> = (0..9).map(|i| 0.05 * i as f64).collect();
        let f: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, x)| 3.0 - 0.2 * x * x + 0.01 * ((i * 5 % 7) as f64 - 3.0))
            .collect();
        let a = quad_fit(&sweep(x.clone(), f.clone())).unwrap();
        let mut idx: Vec<usize> = (0..9).collect();
        idx.reverse();
        idx.swap(2, 6);
        let b = quad_fit(&sweep(
            idx.iter().map(|&i| x[i]).collect(),
            idx.iter().map(|&i| f[i]).collect(),
        ))
        .unwrap();
        assert!((a.a - b.a).abs() < 1e-13 && (a.b - b.b).abs() < 1e-12);
        assert!((a.a_err - b.a_err).abs() < 1e-13 && (a.b_err - b.b_err).abs() < 1e-12);
    }

    #[test]
    fn weighted_fit_requires_stderr() {
        let s = sweep(vec![0.0, 0.1, 0.2], vec![1.0, 0.99, 0.97]);
        assert!(quad_fit_weighted(&s, FitWeighting::InverseVariance).is_err());
        let mut w = s.clone();
        w.f_stderr = vec![0.01, 0.01, 0.01];
        let a = quad_fit_weighted(&w, FitWeighting::InverseVariance).unwrap();
        let b = quad_fit(&s).unwrap();
        assert!((a.a - b.a).abs() < 1e-12 && (a.b - b.b).abs() < 1e-10);
    }

    #[test]
    fn monte_carlo_recovers_generating_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let x = default_delta_omegas(1.0);
        let half_width = 0.00494 * 3f64.sqrt();
        let f = x
            .iter()
            .map(|x| 9.62 - 0.174 * x * x + rng.gen_range(-half_width..=half_width))
            .collect();
        let fit = quad_fit(&sweep(x, f)).unwrap();
        assert!((fit.a - 9.62).abs() < 0.05, "{fit:?}");
        assert!((fit.b - 0.174).abs() < 0.2, "{fit:?}");
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let mut seen = std::collections::HashSet::new();
        for p in 0..9 {
            for r in 0..100 {
                assert!(seen.insert(realization_seed(7, p, r)));
            }
        }
        assert_eq!(realization_seed(7, 3, 4), realization_seed(7, 3, 4));
    }

    fn small() -> (ModelParams, ProtocolWindow, Pulse) {
        let p = ModelParams::new(0.5).unwrap().with_n_max(24).unwrap();
        let w = ProtocolWindow::standard(&p).unwrap();
        let pulse = onoff_pulse(&w, 1.0, 4.0);
        (p, w, pulse)
    }

    #[test]
    fn systematic_single_point_equals_own_f() {
        let (p, w, pulse) = small();
        let s = systematic_sweep(&pulse, &p, &[0.5], &w).unwrap();
        let (f, _) = run_onoff(&p, &w).unwrap();
        assert_eq!(s.f_mean, vec![f]);
        assert_eq!(s.f_stderr, vec![0.0]);
    }

    #[test]
    fn zero_noise_is_noiseless_and_runs_are_reproducible() {
        let (p, w, pulse) = small();
        let spec = NoiseSpec::new(0.0, 0.03, 9);
        let a = noise_average(&pulse, &p, &w, &spec, &[0.0, 0.2], 4).unwrap();
        let (f, _) = run_onoff(&p, &w).unwrap();
        assert_eq!(a.f_mean[0], f);
        assert_eq!(a.f_stderr[0], 0.0);
        assert!(a.f_stderr[1] > 0.0);
        let b = noise_average(&pulse, &p, &w, &spec, &[0.0, 0.2], 4).unwrap();
        assert_eq!(a, b);
        assert!(noise_average(&pulse, &p, &w, &spec, &[0.2], 1).is_err());
    }
}
