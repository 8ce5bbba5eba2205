//! Nodal points N (analytic), Y-points (analytic) and X-points (Newton in the
//! frame co-moving with a node), with planar fixed-point classification.

mod classify;
mod manifold;
mod xpoint;

pub use classify::{classify_fixed_point, FixedPointClassification, FixedPointKind};
pub use manifold::{frozen_comoving_field, trace_asymptotic_curves, AsymptoticCurves};
pub use xpoint::{find_x_points, refine_x_point, XPoint, XPointSearch};

use std::fmt;

use crate::error::{Error, Result};
use crate::model::WavefunctionModel;

pub const DEFAULT_ESCAPE_GUARD: f64 = 1e-6;
pub const DEFAULT_X_TOL: f64 = 1e-10;
pub const DEFAULT_DEDUP_RADIUS: f64 = 1e-8;
pub const DEFAULT_MAX_NEWTON_ITER: usize = 100;
pub const DEFAULT_K_LIMIT: i64 = 51;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    Nodal,
    X,
    Y,
}

impl fmt::Display for PointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PointKind::Nodal => "N",
            PointKind::X => "X",
            PointKind::Y => "Y",
        })
    }
}

/// Inclusive range of integer indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KWindow {
    pub min: i64,
    pub max: i64,
}

impl KWindow {
    pub fn new(min: i64, max: i64) -> Self {
        Self {
            min: min.min(max),
            max: min.max(max),
        }
    }

    pub fn symmetric(limit: i64) -> Self {
        Self::new(-limit.abs(), limit.abs())
    }

    pub fn contains(&self, k: i64) -> bool {
        (self.min..=self.max).contains(&k)
    }

    fn with_parity(&self, parity: i64) -> impl Iterator<Item = i64> {
        (self.min..=self.max).filter(move |k| k.rem_euclid(2) == parity)
    }
}

impl Default for KWindow {
    fn default() -> Self {
        Self::symmetric(DEFAULT_K_LIMIT)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPointOptions {
    /// Minimum time distance from an escape instant.
    pub escape_guard: f64,
    pub x_tol: f64,
    pub dedup_radius: f64,
    pub max_iter: usize,
}

impl Default for CriticalPointOptions {
    fn default() -> Self {
        Self {
            escape_guard: DEFAULT_ESCAPE_GUARD,
            x_tol: DEFAULT_X_TOL,
            dedup_radius: DEFAULT_DEDUP_RADIUS,
            max_iter: DEFAULT_MAX_NEWTON_ITER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodalPoint {
    pub k: i64,
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub t: f64,
}

impl NodalPoint {
    pub fn speed(&self) -> f64 {
        self.velocity[0].hypot(self.velocity[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YPoint {
    /// The even integer `2k'`.
    pub k_prime: i64,
    pub position: [f64; 2],
    pub t: f64,
}

fn distance_to_multiple(t: f64, period: f64) -> f64 {
    let r = t.rem_euclid(period);
    r.min(period - r)
}

/// Fails with `NearEscape` when the nodal formula denominators are within the guard.
pub fn check_escape_guard(model: &WavefunctionModel, t: f64, guard: f64) -> Result<()> {
    let f = model.frequencies();
    let periods: Vec<f64> = match model {
        WavefunctionModel::TwoQubit(_) => f.escape_period().into_iter().collect(),
        WavefunctionModel::SingleNode(_) => {
            vec![
                std::f64::consts::PI / f.omega_y,
                std::f64::consts::PI / (f.omega_x + f.omega_y),
            ]
        }
    };
    if periods.iter().any(|&p| distance_to_multiple(t, p) < guard) {
        return Err(Error::NearEscape { t });
    }
    Ok(())
}

/// Escape instants `n·π/|ω_x − ω_y|`, `n ≥ 1`, up to `horizon`.
pub fn escape_times(model: &WavefunctionModel, horizon: f64) -> Result<Vec<f64>> {
    let period = model
        .frequencies()
        .escape_period()
        .ok_or_else(|| Error::InvalidParameter("escape times need omega_x != omega_y".into()))?;
    Ok((1..)
        .map(|n| n as f64 * period)
        .take_while(|&t| t <= horizon)
        .collect())
}

/// Nodal points at time `t`, one per admissible index in the window, sorted by `k`.
/// The single-node model always yields exactly one point with `k = 0`.
pub fn nodal_points(model: &WavefunctionModel, t: f64, window: KWindow) -> Result<Vec<NodalPoint>> {
    nodal_points_guarded(model, t, window, DEFAULT_ESCAPE_GUARD)
}

pub fn nodal_points_guarded(
    model: &WavefunctionModel,
    t: f64,
    window: KWindow,
    guard: f64,
) -> Result<Vec<NodalPoint>> {
    check_escape_guard(model, t, guard)?;
    Ok(match model {
        WavefunctionModel::SingleNode(m) => m
            .node(t)
            .map(|(position, velocity)| NodalPoint {
                k: 0,
                position,
                velocity,
                t,
            })
            .into_iter()
            .collect(),
        WavefunctionModel::TwoQubit(m) => window
            .with_parity(m.node_parity())
            .filter_map(|k| {
                m.line_point(k, t).map(|(position, velocity)| NodalPoint {
                    k,
                    position,
                    velocity,
                    t,
                })
            })
            .collect(),
    })
}

/// Nodal point of index `k` (ignores windows).
pub fn nodal_point(model: &WavefunctionModel, k: i64, t: f64) -> Result<NodalPoint> {
    check_escape_guard(model, t, DEFAULT_ESCAPE_GUARD)?;
    let found = match model {
        WavefunctionModel::SingleNode(m) => m.node(t),
        WavefunctionModel::TwoQubit(m) => {
            if k.rem_euclid(2) != m.node_parity() {
                return Err(Error::InvalidParameter(format!(
                    "k = {k} has the wrong parity for a node"
                )));
            }
            m.line_point(k, t)
        }
    };
    found
        .map(|(position, velocity)| NodalPoint {
            k,
            position,
            velocity,
            t,
        })
        .ok_or(Error::NearEscape { t })
}

/// Y-points at time `t`; for the two-qubit model one per even `2k'` in the window.
pub fn y_points(model: &WavefunctionModel, t: f64, window: KWindow) -> Result<Vec<YPoint>> {
    check_escape_guard(model, t, DEFAULT_ESCAPE_GUARD)?;
    Ok(match model {
        WavefunctionModel::SingleNode(m) => m
            .node(t)
            .map(|(p, _)| YPoint {
                k_prime: 0,
                position: [0.0, p[1]],
                t,
            })
            .into_iter()
            .collect(),
        WavefunctionModel::TwoQubit(m) => window
            .with_parity(1 - m.node_parity())
            .filter_map(|k| {
                m.line_point(k, t).map(|(position, _)| YPoint {
                    k_prime: k,
                    position,
                    t,
                })
            })
            .collect(),
    })
}

/// The line carrying every N and Y point of the two-qubit model at time `t`:
/// the point of index `k` sits at `origin + k·step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalLine {
    pub origin: [f64; 2],
    pub step: [f64; 2],
    pub node_parity: i64,
}

impl CriticalLine {
    pub fn at(model: &WavefunctionModel, t: f64) -> Option<Self> {
        let m = model.as_two_qubit()?;
        let (p0, _) = m.line_point(0, t)?;
        let (p1, _) = m.line_point(1, t)?;
        Some(Self {
            origin: p0,
            step: [p1[0] - p0[0], p1[1] - p0[1]],
            node_parity: m.node_parity(),
        })
    }

    pub fn point(&self, k: i64) -> [f64; 2] {
        [
            self.origin[0] + k as f64 * self.step[0],
            self.origin[1] + k as f64 * self.step[1],
        ]
    }

    /// Continuous index of the orthogonal projection of `p` onto the line.
    pub fn projected_index(&self, p: [f64; 2]) -> f64 {
        let d = [p[0] - self.origin[0], p[1] - self.origin[1]];
        let s2 = self.step[0] * self.step[0] + self.step[1] * self.step[1];
        (d[0] * self.step[0] + d[1] * self.step[1]) / s2
    }

    /// Nearest index of the given parity to `p` (exact: points are evenly spaced).
    pub fn nearest_with_parity(&self, p: [f64; 2], parity: i64) -> i64 {
        let s = self.projected_index(p);
        let base = s.floor() as i64;
        let lo = if base.rem_euclid(2) == parity {
            base
        } else {
            base - 1
        };
        let hi = lo + 2;
        if (s - lo as f64).abs() <= (hi as f64 - s).abs() {
            lo
        } else {
            hi
        }
    }

    /// Unit direction of increasing index, flipped to have a non-negative x-component.
    pub fn right_direction(&self) -> [f64; 2] {
        let n = self.step[0].hypot(self.step[1]);
        let sgn = if self.step[0] < 0.0 || (self.step[0] == 0.0 && self.step[1] < 0.0) {
            -1.0
        } else {
            1.0
        };
        [sgn * self.step[0] / n, sgn * self.step[1] / n]
    }
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_two_qubit, OscillatorFrequencies, SingleNodeModel};

    fn two_qubit(c2: f64) -> WavefunctionModel {
        make_two_qubit(c2, 2.5, OscillatorFrequencies::irrational_default())
            .unwrap()
            .into()
    }

    #[test]
    fn escape_times_examples() {
        let m = two_qubit(0.5_f64.sqrt());
        let ts = escape_times(&m, 10.0).unwrap();
        let tinf = std::f64::consts::PI / (3.0_f64.sqrt() - 1.0);
        assert_eq!(ts, vec![tinf, 2.0 * tinf]);
        assert!((ts[0] - 4.3).abs() < 1e-2);
        assert!(escape_times(&m, 4.0).unwrap().is_empty());
        let c: WavefunctionModel =
            make_two_qubit(0.5, 2.5, OscillatorFrequencies::new(1.0, 2.0).unwrap())
                .unwrap()
                .into();
        assert_eq!(
            escape_times(&c, 7.0).unwrap(),
            vec![std::f64::consts::PI, 2.0 * std::f64::consts::PI]
        );
        let same: WavefunctionModel =
            make_two_qubit(0.5, 2.5, OscillatorFrequencies::new(1.0, 1.0).unwrap())
                .unwrap()
                .into();
        assert!(escape_times(&same, 7.0).is_err());
    }

    #[test]
    fn nodes_lie_on_a_line_with_alternating_y_points() {
        let m = two_qubit(0.5_f64.sqrt());
        let nodes = nodal_points(&m, 1.5, KWindow::symmetric(9)).unwrap();
        assert_eq!(nodes.len(), 10);
        assert!(nodes.iter().all(|n| n.k % 2 != 0));
        let line = CriticalLine::at(&m, 1.5).unwrap();
        for n in &nodes {
            let p = line.point(n.k);
            assert!(dist(p, n.position) < 1e-12);
        }
        let ys = y_points(&m, 1.5, KWindow::symmetric(8)).unwrap();
        let central = ys.iter().find(|y| y.k_prime == 0).unwrap();
        assert!(central.position[0].abs() < 1e-15 && central.position[1].abs() < 1e-15);
    }

    #[test]
    fn near_escape_is_rejected() {
        let m = two_qubit(0.3);
        let tinf = std::f64::consts::PI / (3.0_f64.sqrt() - 1.0);
        assert!(matches!(
            nodal_points(&m, tinf + 1e-8, KWindow::default()),
            Err(Error::NearEscape { .. })
        ));
        assert!(matches!(
            y_points(&m, 0.0, KWindow::default()),
            Err(Error::NearEscape { .. })
        ));
    }

    #[test]
    fn single_node_y_point_shares_y() {
        let m: WavefunctionModel = SingleNodeModel::new(
            1.0,
            1.0,
            0.5_f64.sqrt(),
            OscillatorFrequencies::irrational_default(),
        )
        .unwrap()
        .into();
        let n = nodal_points(&m, 1.5, KWindow::default()).unwrap();
        let y = y_points(&m, 1.5, KWindow::default()).unwrap();
        assert_eq!(n.len(), 1);
        assert_eq!(y[0].position[0], 0.0);
        assert_eq!(y[0].position[1], n[0].position[1]);
        assert!(m.psi(n[0].position[0], n[0].position[1], 1.5).norm() < 1e-10);
    }

    #[test]
    fn nearest_index_by_projection() {
        let m = two_qubit(0.3);
        let line = CriticalLine::at(&m, 2.2).unwrap();
        let p = [0.37, -1.1];
        let k = line.nearest_with_parity(p, 1);
        let brute = (-101..=101)
            .filter(|k: &i64| k.rem_euclid(2) == 1)
            .min_by(|a, b| {
                dist(line.point(*a), p)
                    .partial_cmp(&dist(line.point(*b), p))
                    .unwrap()
            })
            .unwrap();
        assert_eq!(k, brute);
    }
}
