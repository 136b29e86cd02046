//! Adaptive explicit Runge-Kutta integration (Dormand-Prince 5(4)).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; `None` picks one from the derivative scale.
    pub h0: Option<f64>,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            h0: None,
            h_min: 1e-12,
            max_steps: 10_000_000,
        }
    }
}

impl Tolerance {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    /// Both tolerances divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rtol: self.rtol / factor,
            atol: self.atol / factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive integrator that carries its step size across calls.
pub struct Integrator {
    tol: Tolerance,
    h: Option<f64>,
    k: Vec<Vec<f64>>,
    tmp: Vec<f64>,
    y5: Vec<f64>,
    pub stats: OdeStats,
}

impl Integrator {
    pub fn new(dim: usize, tol: Tolerance) -> Self {
        Self {
            tol,
            h: tol.h0,
            k: vec![vec![0.0; dim]; 7],
            tmp: vec![0.0; dim],
            y5: vec![0.0; dim],
            stats: OdeStats::default(),
        }
    }

    /// Advances `y` from `t0` to exactly `t1`. Kinks in the time dependence of
    /// `f(t, y, dy)` should sit on segment boundaries.
    pub fn advance<F>(&mut self, f: &mut F, t0: f64, t1: f64, y: &mut [f64]) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let dim = y.len();
        if t1 <= t0 {
            return Ok(());
        }
        f(t0, y, &mut self.k[0]);
        self.stats.evaluations += 1;
        let mut t = t0;
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(t0, y),
        }
        .min(t1 - t0);
        let mut steps = 0;
        while t < t1 {
            steps += 1;
            if steps > self.tol.max_steps {
                return Err(Error::Integrator {
                    t,
                    reason: "step budget exhausted".into(),
                });
            }
            let last = t + h >= t1;
            if last {
                h = t1 - t;
            }
            for s in 1..7 {
                for i in 0..dim {
                    let mut acc = 0.0;
                    for (j, a) in A[s][..s].iter().enumerate() {
                        acc += a * self.k[j][i];
                    }
                    self.tmp[i] = y[i] + h * acc;
                }
                let (_, tail) = self.k.split_at_mut(s);
                f(t + C[s] * h, &self.tmp, &mut tail[0]);
                if s == 6 {
                    self.y5.copy_from_slice(&self.tmp);
                }
            }
            self.stats.evaluations += 6;
            let mut err = 0.0;
            for i in 0..dim {
                let mut e = 0.0;
                for (j, w) in E.iter().enumerate() {
                    e += w * self.k[j][i];
                }
                let sc = self.tol.atol + self.tol.rtol * y[i].abs().max(self.y5[i].abs());
                let r = h * e / sc;
                err += r * r;
            }
            let err = (err / dim as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Integrator {
                    t,
                    reason: "non-finite error estimate".into(),
                });
            }
            if err <= 1.0 {
                t = if last { t1 } else { t + h };
                y.copy_from_slice(&self.y5);
                let (first, rest) = self.k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                self.stats.accepted += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    h *= fac;
                }
                self.h = Some(if last { (h * fac).max(self.tol.h_min) } else { h });
            } else {
                self.stats.rejected += 1;
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                if h < self.tol.h_min {
                    return Err(Error::Integrator {
                        t,
                        reason: format!("step size {h:e} below minimum"),
                    });
                }
            }
        }
        Ok(())
    }

    fn initial_step(&self, _t0: f64, y: &[f64]) -> f64 {
        let d0 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let d1 = self.k[0].iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.max(self.tol.h_min)
    }
}

/// Integrates from `times[0]` through every later entry, calling `observe`
/// after each.
pub fn integrate<F, O>(
    f: &mut F,
    y: &mut [f64],
    times: &[f64],
    tol: Tolerance,
    mut observe: O,
) -> Result<OdeStats>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]),
{
    let mut ode = Integrator::new(y.len(), tol);
    if let Some(&t) = times.first() {
        observe(t, y);
    }
    for w in times.windows(2) {
        ode.advance(f, w[0], w[1], y)?;
        observe(w[1], y);
    }
    Ok(ode.stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut y = [1.0];
        let mut f = |_t: f64, y: &[f64], d: &mut [f64]| d[0] = -2.0 * y[0];
        integrate(&mut f, &mut y, &[0.0, 1.0, 3.0], Tolerance::new(1e-10, 1e-12), |_, _| {}).unwrap();
        assert!((y[0] - (-6.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_phase() {
        let mut y = [1.0, 0.0];
        let mut f = |_t: f64, y: &[f64], d: &mut [f64]| {
            d[0] = y[1];
            d[1] = -y[0];
        };
        let t = 20.0;
        integrate(&mut f, &mut y, &[0.0, t], Tolerance::new(1e-10, 1e-12), |_, _| {}).unwrap();
        assert!((y[0] - t.cos()).abs() < 1e-7 && (y[1] + t.sin()).abs() < 1e-7);
    }

    #[test]
    fn fifth_order_convergence() {
        // fixed-step error ratio when halving h approaches 2^5
        let run = |h0: f64| {
            let tol = Tolerance {
                rtol: 1e3,
                atol: 1e3,
                h0: Some(h0),
                h_min: 0.0,
                max_steps: 1_000_000,
            };
            let mut y = [1.0, 0.0];
            let mut f = |_t: f64, y: &[f64], d: &mut [f64]| {
                d[0] = y[1];
                d[1] = -y[0];
            };
            let times: Vec<f64> = (0..=((2.0 / h0) as usize)).map(|k| k as f64 * h0).collect();
            integrate(&mut f, &mut y, &times, tol, |_, _| {}).unwrap();
            (y[0] - 2f64.cos()).abs()
        };
        let ratio = run(0.1) / run(0.05);
        assert!(ratio > 20.0 && ratio < 80.0, "{ratio}");
    }

    #[test]
    fn kinked_rhs_across_segments() {
        let mut y = [0.0];
        let mut f = |t: f64, _y: &[f64], d: &mut [f64]| d[0] = (t - 1.0).abs();
        integrate(&mut f, &mut y, &[0.0, 1.0, 1.5], Tolerance::default(), |_, _| {}).unwrap();
        assert!((y[0] - 0.625).abs() < 1e-12);
    }
}
