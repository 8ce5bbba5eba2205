//! Explicit Dormand–Prince 5(4) with step-size control, FSAL and the
//! 4th-order continuous extension, over fixed-size states `[f64; N]`.

use crate::error::{Error, Result};

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

/// Consecutive failed evaluations at the minimum step before giving up.
const MAX_CLAMPED_FAILURES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub atol: f64,
    pub rtol: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub safety: f64,
    pub fac_min: f64,
    pub fac_max: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            atol: 1e-9,
            rtol: 1e-9,
            h_min: 1e-9,
            h_max: f64::INFINITY,
            safety: 0.9,
            fac_min: 0.2,
            fac_max: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub evaluations: u64,
    pub accepted: u64,
    pub rejected: u64,
    /// Steps accepted at `h_min` with the error estimate above tolerance.
    pub degraded: u64,
}

/// One accepted step; the dense interpolant is valid on `[t_old, t_new]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub t_old: f64,
    pub t_new: f64,
    pub degraded: bool,
}

/// Right-hand side; `None` marks a point where the field is undefined.
pub trait Rhs<const N: usize> {
    fn eval(&mut self, t: f64, y: &[f64; N]) -> Option<[f64; N]>;
}

impl<const N: usize, F> Rhs<N> for F
where
    F: FnMut(f64, &[f64; N]) -> Option<[f64; N]>,
{
    fn eval(&mut self, t: f64, y: &[f64; N]) -> Option<[f64; N]> {
        self(t, y)
    }
}

#[derive(Debug, Clone)]
pub struct Dopri5<const N: usize> {
    ctrl: StepControl,
    t: f64,
    y: [f64; N],
    k1: [f64; N],
    h: f64,
    direction: f64,
    cont: [[f64; N]; 5],
    t_old: f64,
    h_old: f64,
    stats: SolverStats,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        if *c == 0.0 {
            continue;
        }
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

impl<const N: usize> Dopri5<N> {
    /// Starts at `(t0, y0)`; `direction` is `+1` for forward and `−1` for backward time.
    pub fn new<F: Rhs<N>>(
        ctrl: StepControl,
        f: &mut F,
        t0: f64,
        y0: [f64; N],
        direction: f64,
    ) -> Result<Self> {
        let k1 = f.eval(t0, &y0).ok_or(Error::AtNode {
            x: y0[0],
            y: y0.get(1).copied().unwrap_or(0.0),
            t: t0,
        })?;
        let mut s = Self {
            ctrl,
            t: t0,
            y: y0,
            k1,
            h: 0.0,
            direction: direction.signum(),
            cont: [[0.0; N]; 5],
            t_old: t0,
            h_old: 0.0,
            stats: SolverStats {
                evaluations: 1,
                ..Default::default()
            },
        };
        s.h = s.initial_step(f);
        Ok(s)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; N] {
        &self.y
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.ctrl.atol + self.ctrl.rtol * a.abs().max(b.abs())
    }

    fn initial_step<F: Rhs<N>>(&mut self, f: &mut F) -> f64 {
        let norm = |v: &[f64; N], y: &[f64; N], s: &Self| {
            (v.iter()
                .zip(y)
                .map(|(vi, yi)| (vi / s.scale(*yi, *yi)).powi(2))
                .sum::<f64>()
                / N as f64)
                .sqrt()
        };
        let d0 = norm(&self.y, &self.y, self);
        let d1 = norm(&self.k1, &self.y, self);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let y1 = axpy(&self.y, self.direction * h0, &[(1.0, &self.k1)]);
        let h = match f.eval(self.t + self.direction * h0, &y1) {
            Some(f1) => {
                self.stats.evaluations += 1;
                let diff: [f64; N] = std::array::from_fn(|i| f1[i] - self.k1[i]);
                let d2 = norm(&diff, &self.y, self) / h0;
                let dm = d1.max(d2);
                let h1 = if dm <= 1e-15 {
                    (h0 * 1e-3).max(1e-6)
                } else {
                    (0.01 / dm).powf(0.2)
                };
                (100.0 * h0).min(h1)
            }
            None => h0,
        };
        h.clamp(self.ctrl.h_min, self.ctrl.h_max)
    }

    /// Takes one accepted step without passing `t_limit`.
    pub fn step<F: Rhs<N>>(&mut self, f: &mut F, t_limit: f64) -> Result<Step> {
        let mut clamped_failures = 0usize;
        let mut reject_streak = false;
        loop {
            let remaining = (t_limit - self.t) * self.direction;
            if remaining <= 0.0 {
                return Err(Error::InvalidParameter(
                    "step requested past the integration limit".into(),
                ));
            }
            let mut h = self.h.min(self.ctrl.h_max).max(self.ctrl.h_min);
            let mut hits_end = false;
            if h >= remaining || (remaining - h) < 1e-12 * remaining.max(1.0) {
                h = remaining;
                hits_end = true;
            }
            let at_min = h <= self.ctrl.h_min * (1.0 + 1e-12) && !hits_end;
            let hs = h * self.direction;

            let attempt = self.attempt(f, hs);
            let Some((y_new, k7, err_vec, k)) = attempt else {
                self.stats.rejected += 1;
                if at_min {
                    clamped_failures += 1;
                    if clamped_failures > MAX_CLAMPED_FAILURES {
                        return Err(Error::Stalled { t: self.t });
                    }
                    // Perturb the clamped step so a different stage layout is tried.
                    self.h = self.ctrl.h_min * (1.0 + clamped_failures as f64);
                } else {
                    self.h = (h * 0.25).max(self.ctrl.h_min);
                }
                reject_streak = true;
                continue;
            };

            let mut sum = 0.0;
            for i in 0..N {
                let sc = self.scale(self.y[i], y_new[i]);
                sum += (err_vec[i] / sc).powi(2);
            }
            let err = (sum / N as f64).sqrt();
            let err = if err.is_finite() { err } else { f64::INFINITY };

            if err <= 1.0 || at_min {
                let degraded = err > 1.0;
                self.finish_step(hs, y_new, k7, &k);
                self.stats.accepted += 1;
                if degraded {
                    self.stats.degraded += 1;
                }
                let fac = if err == 0.0 {
                    self.ctrl.fac_max
                } else {
                    (self.ctrl.safety * err.powf(-0.2)).clamp(self.ctrl.fac_min, self.ctrl.fac_max)
                };
                let fac = if reject_streak { fac.min(1.0) } else { fac };
                if !hits_end || fac < 1.0 {
                    self.h = (h * fac).clamp(self.ctrl.h_min, self.ctrl.h_max);
                }
                if hits_end {
                    // Snap to the limit exactly.
                    self.t = t_limit;
                }
                return Ok(Step {
                    t_old: self.t_old,
                    t_new: self.t,
                    degraded,
                });
            }
            self.stats.rejected += 1;
            reject_streak = true;
            let fac = (self.ctrl.safety * err.powf(-0.2)).clamp(self.ctrl.fac_min, 1.0);
            self.h = (h * fac).max(self.ctrl.h_min);
        }
    }

    #[allow(clippy::type_complexity)]
    fn attempt<F: Rhs<N>>(
        &mut self,
        f: &mut F,
        h: f64,
    ) -> Option<([f64; N], [f64; N], [f64; N], [[f64; N]; 6])> {
        let t = self.t;
        let y = &self.y;
        let k1 = self.k1;
        let mut eval = |tt: f64, yy: &[f64; N], stats: &mut SolverStats| {
            stats.evaluations += 1;
            let v = f.eval(tt, yy)?;
            v.iter().all(|x| x.is_finite()).then_some(v)
        };
        let k2 = eval(t + C2 * h, &axpy(y, h, &[(A21, &k1)]), &mut self.stats)?;
        let k3 = eval(
            t + C3 * h,
            &axpy(y, h, &[(A31, &k1), (A32, &k2)]),
            &mut self.stats,
        )?;
        let k4 = eval(
            t + C4 * h,
            &axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            &mut self.stats,
        )?;
        let k5 = eval(
            t + C5 * h,
            &axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            &mut self.stats,
        )?;
        let k6 = eval(
            t + h,
            &axpy(
                y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
            &mut self.stats,
        )?;
        let y_new = axpy(
            y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = eval(t + h, &y_new, &mut self.stats)?;
        let mut err = [0.0; N];
        for i in 0..N {
            err[i] =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        Some((y_new, k7, err, [k1, k2, k3, k4, k5, k6]))
    }

    fn finish_step(&mut self, h: f64, y_new: [f64; N], k7: [f64; N], k: &[[f64; N]; 6]) {
        let [k1, _, k3, k4, k5, k6] = k;
        for i in 0..N {
            let ydiff = y_new[i] - self.y[i];
            let bspl = h * k1[i] - ydiff;
            self.cont[0][i] = self.y[i];
            self.cont[1][i] = ydiff;
            self.cont[2][i] = bspl;
            self.cont[3][i] = ydiff - h * k7[i] - bspl;
            self.cont[4][i] =
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        self.t_old = self.t;
        self.h_old = h;
        self.t += h;
        self.y = y_new;
        self.k1 = k7;
    }

    /// Continuous extension of the last accepted step.
    pub fn dense(&self, t: f64) -> [f64; N] {
        if self.h_old == 0.0 {
            return self.y;
        }
        let theta = (t - self.t_old) / self.h_old;
        let theta1 = 1.0 - theta;
        std::array::from_fn(|i| {
            let c = &self.cont;
            c[0][i] + theta * (c[1][i] + theta1 * (c[2][i] + theta * (c[3][i] + theta1 * c[4][i])))
        })
    }

    /// Multiplies the given components of the state by `factor`. Valid only for
    /// components that enter the right-hand side linearly and homogeneously
    /// (deviation vectors), so the stored derivative scales the same way.
    pub fn scale_components(&mut self, range: std::ops::Range<usize>, factor: f64) {
        for i in range {
            self.y[i] *= factor;
            self.k1[i] *= factor;
        }
    }

    /// Replaces the state at the current time and re-evaluates the derivative.
    pub fn reset_state<F: Rhs<N>>(&mut self, f: &mut F, y: [f64; N]) -> Result<()> {
        let k1 = f.eval(self.t, &y).ok_or(Error::AtNode {
            x: y[0],
            y: y.get(1).copied().unwrap_or(0.0),
            t: self.t,
        })?;
        self.stats.evaluations += 1;
        self.y = y;
        self.k1 = k1;
        self.h_old = 0.0;
        Ok(())
    }
}
