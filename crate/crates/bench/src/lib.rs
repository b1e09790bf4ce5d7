//! Fixtures shared by the benchmarks.

use dce_core::protocols::{onoff_pulse, OFF_RESONANCE};
use dce_core::{ModelParams, Propagator, ProtocolWindow, Pulse, StateVector};
use num_complex::Complex64;

pub struct Fixture {
    pub params: ModelParams,
    pub window: ProtocolWindow,
    pub propagator: Propagator,
    pub onoff: Pulse,
}

/// Standard window and on-off pulse at coupling `lambda`.
pub fn fixture(lambda: f64) -> Fixture {
    let params = ModelParams::new(lambda).expect("valid coupling");
    let window = ProtocolWindow::standard(&params).expect("valid window");
    let onoff = onoff_pulse(&window, params.omega, OFF_RESONANCE * params.omega);
    Fixture {
        params,
        window,
        propagator: Propagator::new(params),
        onoff,
    }
}

/// Normalized state with every amplitude nonzero.
pub fn dense_state(n_max: usize) -> StateVector {
    let mut s = StateVector::zeros(n_max);
    for (i, (g, e)) in s.c_g.iter_mut().zip(s.c_e.iter_mut()).enumerate() {
        *g = Complex64::from_polar(1.0, 0.37 * i as f64);
        *e = Complex64::from_polar(0.5, -0.21 * i as f64);
    }
    s.normalize();
    s
}
