use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default Fock truncation.
pub const DEFAULT_N_MAX: usize = 64;

/// Physical constants of the driven Rabi model. Frequencies are in units of
/// the cavity frequency, which is normally 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub omega: f64,
    pub omega_q0: f64,
    pub lambda: f64,
    pub delta0: f64,
    pub n_max: usize,
    pub rwa: bool,
}

impl ModelParams {
    /// Resonant reference frame (`omega_q0 = omega = 1`, zero detuning) with
    /// counter-rotating terms included.
    pub fn new(lambda: f64) -> Result<Self> {
        Self::with_frame(1.0, 1.0, lambda, DEFAULT_N_MAX, false)
    }

    pub fn with_frame(
        omega: f64,
        omega_q0: f64,
        lambda: f64,
        n_max: usize,
        rwa: bool,
    ) -> Result<Self> {
        let p = Self {
            omega,
            omega_q0,
            lambda,
            delta0: omega - omega_q0,
            n_max,
            rwa,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_n_max(mut self, n_max: usize) -> Result<Self> {
        self.n_max = n_max;
        self.validate()?;
        Ok(self)
    }

    pub fn with_rwa(mut self, rwa: bool) -> Self {
        self.rwa = rwa;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return bad("omega must be positive");
        }
        if !self.omega_q0.is_finite() {
            return bad("omega_q0 must be finite");
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        if self.n_max < 2 {
            return bad("n_max must be at least 2");
        }
        let expected = self.omega - self.omega_q0;
        if (self.delta0 - expected).abs() > 1e-12 * (1.0 + expected.abs()) {
            return Err(Error::InvalidParameter(format!(
                "delta0 = {} inconsistent with omega - omega_q0 = {}",
                self.delta0, expected
            )));
        }
        Ok(())
    }

    /// Excitation swap time under the RWA at resonance, `pi / (2 lambda)`.
    pub fn swap_time(&self) -> f64 {
        std::f64::consts::FRAC_PI_2 / self.lambda
    }

    /// Angular frequency of the counter-rotating phase at zero modulation.
    pub fn counter_rotating_frequency(&self) -> f64 {
        2.0 * self.omega - self.delta0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inconsistent_detuning() {
        let mut p = ModelParams::new(0.5).unwrap();
        p.delta0 = 0.1;
        assert!(p.validate().is_err());
    }

    #[test]
    fn rejects_small_truncation() {
        assert!(ModelParams::new(0.5).unwrap().with_n_max(1).is_err());
        assert!(ModelParams::new(-0.1).is_err());
    }

    #[test]
    fn swap_time() {
        let p = ModelParams::new(0.8).unwrap();
        assert!((p.swap_time() - std::f64::consts::PI / 1.6).abs() < 1e-15);
    }
}
