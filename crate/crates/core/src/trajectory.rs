//! Bohmian trajectories with optional deviation vectors, sampled on a fixed
//! time grid, with stretching numbers at fixed renormalization instants.

use crate::critical::{nodal_point, NodalPoint};
use crate::error::{Error, Result};
use crate::integrator::{Dopri5, Rhs, SolverStats, StepControl};
use crate::model::WavefunctionModel;

pub const DEFAULT_DT_SAMPLE: f64 = 0.01;
pub const DEFAULT_RENORM_DT: f64 = 0.05;
pub const DEFAULT_T_FINAL: f64 = 20.0;
pub const MAX_SHADOW_DELTA: f64 = 1e-7;
/// Clamped steps allowed between two samples before a run counts as stalled.
/// A close node passage needs a few hundred; a particle caught in orbit
/// around a moving node at r ≲ 1e-4 needs millions per time unit.
pub const MAX_CLAMPED_PER_SAMPLE: u64 = 10_000;

/// Relative slack when comparing grid instants with the end time.
const GRID_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationControls {
    pub atol: f64,
    pub rtol: f64,
    pub h_min: f64,
    pub dt_sample: f64,
    pub renorm_dt: f64,
    pub t_final: f64,
}

impl Default for IntegrationControls {
    fn default() -> Self {
        Self {
            atol: 1e-9,
            rtol: 1e-9,
            h_min: 1e-9,
            dt_sample: DEFAULT_DT_SAMPLE,
            renorm_dt: DEFAULT_RENORM_DT,
            t_final: DEFAULT_T_FINAL,
        }
    }
}

impl IntegrationControls {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("atol", self.atol),
            ("rtol", self.rtol),
            ("h_min", self.h_min),
            ("dt_sample", self.dt_sample),
            ("renorm_dt", self.renorm_dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Validation(format!(
                "t_final must be non-negative, got {}",
                self.t_final
            )));
        }
        let ratio = self.renorm_dt / self.dt_sample;
        if ratio < 1.0 - GRID_SLACK || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::Validation(format!(
                "renorm_dt ({}) must be an integer multiple of dt_sample ({})",
                self.renorm_dt, self.dt_sample
            )));
        }
        Ok(())
    }

    pub fn step_control(&self) -> StepControl {
        StepControl {
            atol: self.atol,
            rtol: self.rtol,
            h_min: self.h_min,
            ..StepControl::default()
        }
    }

    /// Number of grid points `i·dt_sample` in `[0, t_final]`.
    pub fn sample_count(&self) -> usize {
        grid_count(self.t_final, self.dt_sample) + 1
    }

    /// Number of complete renormalization intervals in `[0, t_final]`.
    pub fn renorm_count(&self) -> usize {
        grid_count(self.t_final, self.renorm_dt)
    }

    pub fn samples_per_renorm(&self) -> usize {
        (self.renorm_dt / self.dt_sample).round() as usize
    }
}

fn grid_count(t_final: f64, dt: f64) -> usize {
    (t_final / dt * (1.0 + GRID_SLACK)).floor() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryStatus {
    Completed,
    StalledAtNode { t: f64 },
    Aborted { t: f64, reason: String },
}

impl TrajectoryStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, TrajectoryStatus::Completed)
    }
}

/// Receives samples as the integration proceeds.
pub trait TrajectorySink {
    fn position(&mut self, index: usize, t: f64, position: [f64; 2], degraded: bool);

    /// Stretching number of renormalization interval `index` (ending at `t`),
    /// with `log_norm` the un-renormalized `ln|ξ(t)|`.
    fn stretching(&mut self, _index: usize, _t: f64, _a: f64, _log_norm: f64) {}
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub positions: Vec<[f64; 2]>,
    /// Samples inside a step forced to the minimum step size.
    pub degraded: Vec<bool>,
    pub renorm_times: Vec<f64>,
    /// `ln|ξ|` of the un-renormalized deviation vector at each renormalization instant.
    pub deviation_log_norms: Vec<f64>,
    pub stretching: Vec<f64>,
    pub status: TrajectoryStatus,
    pub stats: SolverStats,
    pub controls: IntegrationControls,
}

impl TrajectoryRecord {
    fn empty(controls: IntegrationControls) -> Self {
        Self {
            times: Vec::with_capacity(controls.sample_count()),
            positions: Vec::with_capacity(controls.sample_count()),
            degraded: Vec::with_capacity(controls.sample_count()),
            renorm_times: Vec::new(),
            deviation_log_norms: Vec::new(),
            stretching: Vec::new(),
            status: TrajectoryStatus::Completed,
            stats: SolverStats::default(),
            controls,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `Σ a` up to each renormalization instant.
    pub fn a_cum(&self) -> Vec<f64> {
        self.stretching
            .iter()
            .scan(0.0, |acc, a| {
                *acc += a;
                Some(*acc)
            })
            .collect()
    }
}

impl TrajectorySink for TrajectoryRecord {
    fn position(&mut self, _index: usize, t: f64, position: [f64; 2], degraded: bool) {
        self.times.push(t);
        self.positions.push(position);
        self.degraded.push(degraded);
    }

    fn stretching(&mut self, _index: usize, t: f64, a: f64, log_norm: f64) {
        self.renorm_times.push(t);
        self.stretching.push(a);
        self.deviation_log_norms.push(log_norm);
    }
}

/// Final state of a streamed integration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub status: TrajectoryStatus,
    pub stats: SolverStats,
    pub final_position: [f64; 2],
    pub t_reached: f64,
}

/// Default initial deviation vector, `(1, 1)/√2`.
pub fn default_xi0() -> [f64; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [s, s]
}

/// Trajectory positions only.
pub fn integrate(
    model: &WavefunctionModel,
    x0: f64,
    y0: f64,
    controls: &IntegrationControls,
) -> Result<TrajectoryRecord> {
    let mut rec = TrajectoryRecord::empty(*controls);
    let summary = integrate_streaming(model, [x0, y0], None, controls, &mut rec)?;
    rec.status = summary.status;
    rec.stats = summary.stats;
    Ok(rec)
}

/// Trajectory together with the deviation vector and its stretching numbers.
pub fn integrate_with_deviation(
    model: &WavefunctionModel,
    x0: f64,
    y0: f64,
    xi0: [f64; 2],
    controls: &IntegrationControls,
) -> Result<TrajectoryRecord> {
    let mut rec = TrajectoryRecord::empty(*controls);
    rec.stretching.reserve(controls.renorm_count());
    let summary = integrate_streaming(model, [x0, y0], Some(xi0), controls, &mut rec)?;
    rec.status = summary.status;
    rec.stats = summary.stats;
    Ok(rec)
}

/// Integrates and streams samples into `sink` without storing them.
/// Errors only for invalid input; numerical trouble ends up in the status.
pub fn integrate_streaming(
    model: &WavefunctionModel,
    start: [f64; 2],
    xi0: Option<[f64; 2]>,
    controls: &IntegrationControls,
    sink: &mut dyn TrajectorySink,
) -> Result<RunSummary> {
    controls.validate()?;
    if !(start[0].is_finite() && start[1].is_finite()) {
        return Err(Error::InvalidParameter(
            "initial position must be finite".into(),
        ));
    }
    match xi0 {
        None => {
            let mut rhs =
                |t: f64, y: &[f64; 2]| model.velocity(y[0], y[1], t).ok().map(|v| v.as_array());
            run_solver(&mut rhs, start, 0.0, controls, sink)
        }
        Some(xi) => {
            let n = xi[0].hypot(xi[1]);
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::InvalidParameter(
                    "initial deviation vector must be non-zero".into(),
                ));
            }
            let mut rhs = |t: f64, y: &[f64; 4]| {
                let (v, j) = model.velocity_and_jacobian(y[0], y[1], t).ok()?;
                let d = j.mul_vec([y[2], y[3]]);
                Some([v[0], v[1], d[0], d[1]])
            };
            let y0 = [start[0], start[1], xi[0] / n, xi[1] / n];
            run_solver(&mut rhs, y0, n.ln(), controls, sink)
        }
    }
}

/// Shared integration loop. For `N == 4` components 2..4 are a deviation
/// vector: it is rescaled to unit length after every accepted step (the
/// equations are linear in ξ, so this is the same as renormalizing on the
/// grid) and the removed log-scale is accumulated.
fn run_solver<const N: usize, F: Rhs<N>>(
    rhs: &mut F,
    y0: [f64; N],
    log0: f64,
    controls: &IntegrationControls,
    sink: &mut dyn TrajectorySink,
) -> Result<RunSummary> {
    let with_xi = N == 4;
    let t_final = controls.t_final;
    let n_samples = controls.sample_count();
    let n_renorm = if with_xi { controls.renorm_count() } else { 0 };
    let pos = |y: &[f64; N]| [y[0], y[1]];
    let xi_norm = |y: &[f64; N]| y[2..N].iter().map(|v| v * v).sum::<f64>().sqrt();

    sink.position(0, 0.0, pos(&y0), false);
    let mut next_sample = 1usize;
    let mut next_renorm = 1usize;
    let mut log_scale = log0;
    let mut prev_log = log0;
    let mut clamped = 0u64;
    let finish = |status, stats, y: &[f64; N], t| RunSummary {
        status,
        stats,
        final_position: pos(y),
        t_reached: t,
    };

    if n_samples <= 1 && n_renorm == 0 {
        return Ok(finish(
            TrajectoryStatus::Completed,
            SolverStats::default(),
            &y0,
            0.0,
        ));
    }
    let mut solver = match Dopri5::new(controls.step_control(), rhs, 0.0, y0, 1.0) {
        Ok(s) => s,
        Err(_) => {
            return Ok(finish(
                TrajectoryStatus::StalledAtNode { t: 0.0 },
                SolverStats::default(),
                &y0,
                0.0,
            ))
        }
    };

    while solver.t() < t_final {
        let step = match solver.step(rhs, t_final) {
            Ok(s) => s,
            Err(Error::Stalled { t }) => {
                return Ok(finish(
                    TrajectoryStatus::StalledAtNode { t },
                    solver.stats(),
                    solver.y(),
                    solver.t(),
                ))
            }
            Err(e) => {
                let t = solver.t();
                return Ok(finish(
                    TrajectoryStatus::Aborted {
                        t,
                        reason: e.to_string(),
                    },
                    solver.stats(),
                    solver.y(),
                    t,
                ));
            }
        };
        if step.degraded {
            clamped += 1;
            if clamped > MAX_CLAMPED_PER_SAMPLE {
                let t = solver.t();
                return Ok(finish(
                    TrajectoryStatus::StalledAtNode { t },
                    solver.stats(),
                    solver.y(),
                    t,
                ));
            }
        }
        let last = step.t_new >= t_final;
        let within = |tg: f64| tg <= step.t_new || (last && tg <= t_final * (1.0 + GRID_SLACK));

        // Renormalization instants first so stretching precedes the samples that share the instant.
        while next_renorm <= n_renorm {
            let tr = next_renorm as f64 * controls.renorm_dt;
            if !within(tr) {
                break;
            }
            let y = solver.dense(tr.min(step.t_new));
            let log_norm = log_scale + xi_norm(&y).ln();
            sink.stretching(next_renorm - 1, tr, log_norm - prev_log, log_norm);
            prev_log = log_norm;
            next_renorm += 1;
        }
        while next_sample < n_samples {
            let ts = next_sample as f64 * controls.dt_sample;
            if !within(ts) {
                break;
            }
            let y = solver.dense(ts.min(step.t_new));
            sink.position(next_sample, ts, pos(&y), step.degraded);
            next_sample += 1;
            clamped = 0;
        }

        if with_xi {
            let n = xi_norm(solver.y());
            if !(n > 0.0 && n.is_finite()) {
                let t = solver.t();
                return Ok(finish(
                    TrajectoryStatus::StalledAtNode { t },
                    solver.stats(),
                    solver.y(),
                    t,
                ));
            }
            log_scale += n.ln();
            solver.scale_components(2..N, 1.0 / n);
        }
    }
    Ok(finish(
        TrajectoryStatus::Completed,
        solver.stats(),
        solver.y(),
        solver.t(),
    ))
}

/// Two-trajectory estimate of the stretching numbers: a companion starts at
/// distance `delta0` along `(1, 1)/√2` and is pulled back onto the `delta0`
/// sphere at every renormalization instant.
pub fn shadow_stretching(
    model: &WavefunctionModel,
    x0: f64,
    y0: f64,
    delta0: f64,
    controls: &IntegrationControls,
) -> Result<Vec<f64>> {
    controls.validate()?;
    if !(delta0 > 0.0 && delta0 <= MAX_SHADOW_DELTA) {
        return Err(Error::InvalidParameter(format!(
            "delta0 must be in (0, {MAX_SHADOW_DELTA}], got {delta0}"
        )));
    }
    let e = default_xi0();
    let mut rhs = |t: f64, y: &[f64; 4]| {
        let a = model.velocity(y[0], y[1], t).ok()?;
        let b = model.velocity(y[2], y[3], t).ok()?;
        Some([a.vx, a.vy, b.vx, b.vy])
    };
    let start = [x0, y0, x0 + delta0 * e[0], y0 + delta0 * e[1]];
    let n_renorm = controls.renorm_count();
    let mut out = Vec::with_capacity(n_renorm);
    if n_renorm == 0 {
        return Ok(out);
    }
    let mut solver = Dopri5::new(controls.step_control(), &mut rhs, 0.0, start, 1.0)?;
    for s in 1..=n_renorm {
        let tr = s as f64 * controls.renorm_dt;
        while solver.t() < tr {
            solver.step(&mut rhs, tr)?;
        }
        let y = *solver.y();
        let d = [y[2] - y[0], y[3] - y[1]];
        let dist = d[0].hypot(d[1]);
        if !(dist > 0.0 && dist.is_finite()) {
            return Err(Error::JacobianSingular { t: tr });
        }
        out.push((dist / delta0).ln());
        let f = delta0 / dist;
        solver.reset_state(&mut rhs, [y[0], y[1], y[0] + f * d[0], y[1] + f * d[1]])?;
    }
    Ok(out)
}

/// Nodal point `k` at each time; `None` inside the escape guard.
pub fn node_track(model: &WavefunctionModel, k: i64, times: &[f64]) -> Vec<Option<NodalPoint>> {
    times
        .iter()
        .map(|&t| nodal_point(model, k, t).ok())
        .collect()
}

/// Co-moving coordinates `(u, v) = (x − x_N, y − y_N)` per sample; `None`
/// where the node is unavailable.
pub fn frame_transform(
    record: &TrajectoryRecord,
    node_track: &[Option<NodalPoint>],
) -> Result<Vec<Option<[f64; 2]>>> {
    frame_transform_positions(&record.positions, node_track)
}

pub fn frame_transform_positions(
    positions: &[[f64; 2]],
    node_track: &[Option<NodalPoint>],
) -> Result<Vec<Option<[f64; 2]>>> {
    if positions.len() != node_track.len() {
        return Err(Error::InvalidParameter(format!(
            "node track has {} entries for {} samples",
            node_track.len(),
            positions.len()
        )));
    }
    Ok(positions
        .iter()
        .zip(node_track)
        .map(|(p, n)| n.map(|n| [p[0] - n.position[0], p[1] - n.position[1]]))
        .collect())
}
