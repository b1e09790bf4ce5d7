//! Dormand-Prince 5(4) with Hairer's continuous extension, specialised to
//! complex state vectors.

use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
const MAX_STEPS: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
    pub h_max: f64,
}

/// Reusable integrator workspace.
pub struct Dopri5 {
    tol: Tolerances,
    k: [Vec<C>; 7],
    tmp: Vec<C>,
    y_new: Vec<C>,
    dense: [Vec<C>; 5],
    /// Step size carried over between intervals.
    pub h: f64,
    pub accepted: usize,
    pub rejected: usize,
}

impl Dopri5 {
    pub fn new(dim: usize, tol: Tolerances) -> Self {
        let z = || vec![C::new(0.0, 0.0); dim];
        Self {
            tol,
            k: [z(), z(), z(), z(), z(), z(), z()],
            tmp: z(),
            y_new: z(),
            dense: [z(), z(), z(), z(), z()],
            h: 0.0,
            accepted: 0,
            rejected: 0,
        }
    }

    /// Integrates `y` from `t0` to `t1`. `samples` must be sorted and lie in
    /// `(t0, t1]`; `on_sample` receives the interpolated state at each.
    pub fn integrate<F, S>(
        &mut self,
        rhs: F,
        t0: f64,
        t1: f64,
        y: &mut [C],
        samples: &[f64],
        on_sample: S,
    ) -> Result<()>
    where
        F: FnMut(f64, &[C], &mut [C]),
        S: FnMut(f64, &[C]) -> Result<()>,
    {
        self.integrate_guarded(rhs, t0, t1, y, samples, on_sample, |_, _| Ok(()))
    }

    /// [`Dopri5::integrate`] that also hands every accepted step's end state
    /// to `on_step`, which may abort the integration.
    #[allow(clippy::too_many_arguments)]
    pub fn integrate_guarded<F, S, G>(
        &mut self,
        mut rhs: F,
        t0: f64,
        t1: f64,
        y: &mut [C],
        samples: &[f64],
        mut on_sample: S,
        mut on_step: G,
    ) -> Result<()>
    where
        F: FnMut(f64, &[C], &mut [C]),
        S: FnMut(f64, &[C]) -> Result<()>,
        G: FnMut(f64, &[C]) -> Result<()>,
    {
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(());
        }
        let h_max = self.tol.h_max.min(span);
        if self.h <= 0.0 {
            self.h = (0.1 * h_max).max(1e-6 * span);
        }
        let mut h = self.h.min(h_max);
        let mut t = t0;
        let mut next_sample = 0;
        let mut interp = vec![C::new(0.0, 0.0); y.len()];

        rhs(t, y, &mut self.k[0]);
        let mut steps = 0usize;

        loop {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::StepFailure {
                    t,
                    reason: "step budget exhausted".into(),
                });
            }
            let last = t + h >= t1 - 1e-13 * t1.abs().max(1.0);
            if last {
                h = t1 - t;
            }

            let err = self.step(&mut rhs, t, h, y);
            if !err.is_finite() {
                return Err(Error::StepFailure {
                    t,
                    reason: "non-finite error estimate".into(),
                });
            }

            if err <= 1.0 {
                let t_new = if last { t1 } else { t + h };
                on_step(t_new, &self.y_new)?;
                let mut dense_ready = false;
                while next_sample < samples.len() && samples[next_sample] <= t_new {
                    let ts = samples[next_sample];
                    if ts == t_new {
                        on_sample(ts, &self.y_new)?;
                    } else {
                        if !dense_ready {
                            self.prepare_dense(h, y);
                            dense_ready = true;
                        }
                        let theta = (ts - t) / h;
                        self.interpolate(theta, &mut interp);
                        on_sample(ts, &interp)?;
                    }
                    next_sample += 1;
                }
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                t = t_new;
                self.accepted += 1;
                let fac = if err == 0.0 {
                    FAC_MAX
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
                };
                if last {
                    // keep the last full-size step as a hint for the next interval
                    if h >= 0.5 * self.h {
                        self.h = (h * fac).min(h_max);
                    }
                    break;
                }
                h = (h * fac).min(h_max);
                self.h = h;
            } else {
                self.rejected += 1;
                h *= (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0);
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::StepFailure {
                        t,
                        reason: format!("step size underflow (h = {h:e})"),
                    });
                }
            }
        }
        while next_sample < samples.len() {
            on_sample(samples[next_sample], y)?;
            next_sample += 1;
        }
        Ok(())
    }

    /// One trial step from `(t, y)` with `k[0] = f(t, y)`. Leaves the
    /// candidate in `y_new`, `k[6] = f(t + h, y_new)`, and returns the scaled
    /// error norm.
    fn step<F>(&mut self, rhs: &mut F, t: f64, h: f64, y: &[C]) -> f64
    where
        F: FnMut(f64, &[C], &mut [C]),
    {
        let n = y.len();
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;

        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        rhs(t + C2 * h, tmp, k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * h, tmp, k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * h, tmp, k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * h, tmp, k5);
        for i in 0..n {
            tmp[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs(t + h, tmp, k6);
        let y_new = &mut self.y_new;
        for i in 0..n {
            y_new[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(t + h, y_new, k7);

        let mut acc = 0.0;
        for i in 0..n {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale =
                self.tol.atol + self.tol.rtol * y[i].norm_sqr().max(y_new[i].norm_sqr()).sqrt();
            acc += e.norm_sqr() / (scale * scale);
        }
        (acc / n as f64).sqrt()
    }

    fn prepare_dense(&mut self, h: f64, y: &[C]) {
        let [k1, _, k3, k4, k5, k6, k7] = &self.k;
        let [r1, r2, r3, r4, r5] = &mut self.dense;
        for i in 0..y.len() {
            let dy = self.y_new[i] - y[i];
            let bspl = h * k1[i] - dy;
            r1[i] = y[i];
            r2[i] = dy;
            r3[i] = bspl;
            r4[i] = dy - h * k7[i] - bspl;
            r5[i] =
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
    }

    fn interpolate(&self, theta: f64, out: &mut [C]) {
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.dense;
        for i in 0..out.len() {
            out[i] = r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances {
            atol: 1e-12,
            rtol: 1e-12,
            h_max: 0.1,
        }
    }

    #[test]
    fn harmonic_phase_rotation() {
        // y' = -i w y  =>  y(t) = exp(-i w t)
        let w = 2.3;
        let mut y = vec![C::new(1.0, 0.0)];
        let samples: Vec<f64> = (1..=100).map(|k| 0.0537 * k as f64).collect();
        let mut dop = Dopri5::new(1, tol());
        let mut worst: f64 = 0.0;
        dop.integrate(
            |_, y, dy| dy[0] = C::new(0.0, -w) * y[0],
            0.0,
            5.37,
            &mut y,
            &samples,
            |t, ys| {
                let exact = C::new(0.0, -w * t).exp();
                worst = worst.max((ys[0] - exact).norm());
                Ok(())
            },
        )
        .unwrap();
        assert!((y[0] - C::new(0.0, -w * 5.37).exp()).norm() < 1e-10);
        // dense output is fourth order; still far below 1e-8 here
        assert!(worst < 1e-8, "dense output error {worst}");
    }

    #[test]
    fn polynomial_is_exact() {
        // y' = 3 t^2  is integrated exactly by a fifth-order method
        let mut y = vec![C::new(0.0, 0.0)];
        let mut dop = Dopri5::new(1, tol());
        dop.integrate(
            |t, _, dy| dy[0] = C::new(3.0 * t * t, 0.0),
            0.0,
            2.0,
            &mut y,
            &[],
            |_, _| Ok(()),
        )
        .unwrap();
        assert!((y[0].re - 8.0).abs() < 1e-12);
    }

    #[test]
    fn samples_reach_endpoint() {
        let mut y = vec![C::new(1.0, 0.0)];
        let mut seen = vec![];
        let mut dop = Dopri5::new(1, tol());
        dop.integrate(
            |_, _, dy| dy[0] = C::new(0.0, 0.0),
            0.0,
            1.0,
            &mut y,
            &[0.5, 1.0],
            |t, _| {
                seen.push(t);
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(seen, vec![0.5, 1.0]);
    }
}
