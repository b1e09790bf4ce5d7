//! Dense reference propagator for piecewise-constant pulses.
//!
//! In the laboratory frame the Hamiltonian
//! `H = -w_q/2 sz + w (a^dag a + 1/2) + lambda sx (a + a^dag)` is constant on
//! every pulse segment, so each segment is propagated exactly through the
//! eigendecomposition of the real symmetric truncated matrix. The result is
//! mapped into the rotating frame by the diagonal transform
//! `|g,n> -> exp(-i theta/2 + i w t (n + 1/2))`,
//! `|e,n> -> exp(+i theta/2 + i w t (n + 1/2))`, `theta = int_0^t w_q`.
//! Counter-rotating terms can be dropped for the RWA reference.

use dce_core::{ModelParams, Piecewise, StateVector};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C;

fn idx(excited: bool, n: usize, n_max: usize) -> usize {
    if excited {
        n_max + 1 + n
    } else {
        n
    }
}

fn lab_hamiltonian(params: &ModelParams, omega_q: f64) -> DMatrix<f64> {
    let n_max = params.n_max;
    let dim = 2 * (n_max + 1);
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for n in 0..=n_max {
        let field = params.omega * (n as f64 + 0.5);
        h[(idx(false, n, n_max), idx(false, n, n_max))] = -0.5 * omega_q + field;
        h[(idx(true, n, n_max), idx(true, n, n_max))] = 0.5 * omega_q + field;
    }
    for n in 1..=n_max {
        let g = params.lambda * (n as f64).sqrt();
        // |g,n> <-> |e,n-1>: rotating; |e,n> <-> |g,n-1>: counter-rotating
        let pairs = [
            (idx(false, n, n_max), idx(true, n - 1, n_max), true),
            (idx(true, n, n_max), idx(false, n - 1, n_max), false),
        ];
        for (i, j, rotating) in pairs {
            if rotating || !params.rwa {
                h[(i, j)] = g;
                h[(j, i)] = g;
            }
        }
    }
    h
}

/// `exp(-i H dt) psi` for real symmetric `H`.
fn propagate(h: &DMatrix<f64>, dt: f64, psi: &DVector<C>) -> DVector<C> {
    let eig = SymmetricEigen::new(h.clone());
    let v = eig.eigenvectors.map(|x| C::new(x, 0.0));
    let mut coeff = v.adjoint() * psi;
    for (c, e) in coeff.iter_mut().zip(eig.eigenvalues.iter()) {
        *c *= C::from_polar(1.0, -e * dt);
    }
    v * coeff
}

/// Frame factor `<l,n| U^dag |l,n>` at time `t` with `theta = int_0^t w_q`.
fn frame(params: &ModelParams, excited: bool, n: usize, t: f64, theta: f64) -> C {
    let q = if excited { 0.5 } else { -0.5 };
    C::from_polar(1.0, q * theta + params.omega * t * (n as f64 + 0.5))
}

/// Rotating-frame amplitudes at `t_end` (within the pulse) starting from the
/// rotating-frame state `initial` at `t = 0`.
pub fn evolve(
    params: &ModelParams,
    pulse: &Piecewise,
    initial: &StateVector,
    t_end: f64,
) -> StateVector {
    let n_max = params.n_max;
    let dim = 2 * (n_max + 1);
    // at t = 0 the frames coincide
    let mut psi = DVector::<C>::zeros(dim);
    for n in 0..=n_max {
        psi[idx(false, n, n_max)] = initial.c_g[n];
        psi[idx(true, n, n_max)] = initial.c_e[n];
    }
    let mut theta = 0.0;
    for seg in pulse.segments() {
        if seg.t0 >= t_end {
            break;
        }
        let dt = seg.t1.min(t_end) - seg.t0;
        let wq = seg.omega_q.max(0.0);
        psi = propagate(&lab_hamiltonian(params, wq), dt, &psi);
        theta += wq * dt;
    }
    let mut out = StateVector::zeros(n_max);
    for n in 0..=n_max {
        out.c_g[n] = frame(params, false, n, t_end, theta) * psi[idx(false, n, n_max)];
        out.c_e[n] = frame(params, true, n, t_end, theta) * psi[idx(true, n, n_max)];
    }
    out
}
