use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interaction-picture amplitudes `C_{g,n}` and `C_{e,n}` for `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub c_g: Vec<Complex64>,
    pub c_e: Vec<Complex64>,
}

impl StateVector {
    pub fn zeros(n_max: usize) -> Self {
        Self {
            c_g: vec![Complex64::new(0.0, 0.0); n_max + 1],
            c_e: vec![Complex64::new(0.0, 0.0); n_max + 1],
        }
    }

    /// `|g, 0>`: qubit and field in their ground states.
    pub fn ground(n_max: usize) -> Self {
        Self::basis(n_max, false, 0).expect("n = 0 always fits")
    }

    pub fn basis(n_max: usize, excited: bool, n: usize) -> Result<Self> {
        if n > n_max {
            return Err(Error::InvalidParameter(format!(
                "Fock index {n} exceeds n_max = {n_max}"
            )));
        }
        let mut s = Self::zeros(n_max);
        if excited {
            s.c_e[n] = Complex64::new(1.0, 0.0);
        } else {
            s.c_g[n] = Complex64::new(1.0, 0.0);
        }
        Ok(s)
    }

    pub fn n_max(&self) -> usize {
        self.c_g.len() - 1
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c_g.iter().chain(&self.c_e).map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        for c in self.c_g.iter_mut().chain(self.c_e.iter_mut()) {
            *c /= n;
        }
    }

    /// Mean photon number `sum_n n (|C_{g,n}|^2 + |C_{e,n}|^2)`.
    pub fn photon_expectation(&self) -> f64 {
        photon_expectation(&self.c_g, &self.c_e)
    }

    /// Total excitation number `sum_n [n |C_{g,n}|^2 + (n + 1) |C_{e,n}|^2]`,
    /// conserved under the RWA.
    pub fn excitation_number(&self) -> f64 {
        self.c_g
            .iter()
            .zip(&self.c_e)
            .enumerate()
            .map(|(n, (g, e))| n as f64 * g.norm_sqr() + (n + 1) as f64 * e.norm_sqr())
            .sum()
    }

    /// Population in the two highest Fock levels.
    pub fn tail_population(&self) -> f64 {
        tail_population(&self.c_g, &self.c_e)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.c_g
            .iter()
            .zip(&other.c_g)
            .chain(self.c_e.iter().zip(&other.c_e))
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Euclidean distance between amplitude vectors.
    pub fn distance(&self, other: &StateVector) -> f64 {
        self.c_g
            .iter()
            .zip(&other.c_g)
            .chain(self.c_e.iter().zip(&other.c_e))
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }
}

pub(crate) fn photon_expectation(c_g: &[Complex64], c_e: &[Complex64]) -> f64 {
    c_g.iter()
        .zip(c_e)
        .enumerate()
        .map(|(n, (g, e))| n as f64 * (g.norm_sqr() + e.norm_sqr()))
        .sum()
}

pub(crate) fn tail_population(c_g: &[Complex64], c_e: &[Complex64]) -> f64 {
    let top = c_g.len() - 1;
    (top - 1..=top)
        .map(|n| c_g[n].norm_sqr() + c_e[n].norm_sqr())
        .sum()
}
