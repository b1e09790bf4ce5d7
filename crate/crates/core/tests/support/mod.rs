#![allow(dead_code)]

pub mod oracle;

use dce_core::{Piecewise, StateVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random piecewise-constant pulse on `[0, duration]` with values in `[0, max]`.
pub fn random_piecewise(
    rng: &mut ChaCha8Rng,
    duration: f64,
    max_segments: usize,
    max: f64,
) -> Piecewise {
    let k = rng.gen_range(1..=max_segments);
    let mut cuts: Vec<f64> = (1..k)
        .map(|_| rng.gen_range(0.05..0.95) * duration)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-3 * duration);
    let values: Vec<f64> = (0..=cuts.len()).map(|_| rng.gen_range(0.0..=max)).collect();
    Piecewise::from_switches(duration, &cuts, &values).expect("valid random pulse")
}

/// Random normalized state over all levels below `occupied`.
pub fn random_state(rng: &mut ChaCha8Rng, n_max: usize, occupied: usize) -> StateVector {
    let mut s = StateVector::zeros(n_max);
    for n in 0..occupied.min(n_max + 1) {
        s.c_g[n] = num_complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        s.c_e[n] = num_complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    s.normalize();
    s
}
