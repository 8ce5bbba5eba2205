use log::debug;

use super::classify::{classify_fixed_point, FixedPointClassification};
use super::{dist, CriticalLine, CriticalPointOptions, NodalPoint, Side};
use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::model::WavefunctionModel;

/// Fraction of the N–Y distance used for the perturbation rings around the node.
const RING_RADII: [f64; 2] = [0.3, 0.6];
const RING_SIZE: usize = 8;
/// Same, around the neighbouring nodes.
const NEIGHBOUR_RING_RADII: [f64; 2] = [0.1, 0.3];
const MAX_BACKTRACK: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XPoint {
    pub node_k: i64,
    pub side: Side,
    /// Position relative to the node, `(u, v)`.
    pub offset: [f64; 2],
    pub position_inertial: [f64; 2],
    /// Jacobian of the co-moving flow (equal to the inertial velocity Jacobian).
    pub jacobian: Mat2,
    pub classification: Option<FixedPointClassification>,
    pub residual: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct XPointSearch {
    pub points: Vec<XPoint>,
    /// Sides on which no seed converged.
    pub failed: Vec<Side>,
    /// Converged roots beyond the one-per-side cap.
    pub anomalies: usize,
}

impl XPointSearch {
    pub fn on_side(&self, side: Side) -> Option<&XPoint> {
        self.points.iter().find(|p| p.side == side)
    }

    pub fn errors(&self) -> Vec<Error> {
        self.failed
            .iter()
            .map(|&s| Error::NoConvergence(s))
            .collect()
    }
}

fn comoving_residual(
    model: &WavefunctionModel,
    node: &NodalPoint,
    w: [f64; 2],
) -> Result<([f64; 2], Mat2)> {
    let (v, j) =
        model.velocity_and_jacobian(node.position[0] + w[0], node.position[1] + w[1], node.t)?;
    let f = [v[0] - node.velocity[0], v[1] - node.velocity[1]];
    if !(f[0].is_finite() && f[1].is_finite() && j.is_finite()) {
        return Err(Error::AtNode {
            x: node.position[0] + w[0],
            y: node.position[1] + w[1],
            t: node.t,
        });
    }
    Ok((f, j))
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Damped Newton iteration for a zero of the co-moving velocity starting at
/// offset `w0`. Returns the converged offset, its residual and Jacobian.
pub fn refine_x_point(
    model: &WavefunctionModel,
    node: &NodalPoint,
    w0: [f64; 2],
    opts: &CriticalPointOptions,
) -> Option<([f64; 2], f64, Mat2)> {
    let mut w = w0;
    let (mut f, mut j) = comoving_residual(model, node, w).ok()?;
    let mut r = norm(f);
    for _ in 0..opts.max_iter {
        if r < opts.x_tol {
            return Some((w, r, j));
        }
        let d = j.solve([-f[0], -f[1]])?;
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..MAX_BACKTRACK {
            let trial = [w[0] + lambda * d[0], w[1] + lambda * d[1]];
            if let Ok((ft, jt)) = comoving_residual(model, node, trial) {
                let rt = norm(ft);
                if rt < r || rt < opts.x_tol {
                    w = trial;
                    f = ft;
                    j = jt;
                    r = rt;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (r < opts.x_tol).then_some((w, r, j))
}

struct NodeFrame {
    right: [f64; 2],
    /// Adjacent Y-points.
    ys: Vec<[f64; 2]>,
    /// Offsets of the neighbouring nodes.
    neighbours: Vec<[f64; 2]>,
}

fn node_frame(model: &WavefunctionModel, node: &NodalPoint) -> Option<NodeFrame> {
    match model {
        WavefunctionModel::SingleNode(_) => Some(NodeFrame {
            right: [1.0, 0.0],
            ys: vec![[0.0, node.position[1]]],
            neighbours: Vec::new(),
        }),
        WavefunctionModel::TwoQubit(_) => {
            let line = CriticalLine::at(model, node.t)?;
            let off = |k: i64| {
                let p = line.point(k);
                [p[0] - node.position[0], p[1] - node.position[1]]
            };
            Some(NodeFrame {
                right: line.right_direction(),
                ys: vec![line.point(node.k - 1), line.point(node.k + 1)],
                neighbours: vec![off(node.k - 2), off(node.k + 2)],
            })
        }
    }
}

fn ring(center: [f64; 2], radius: f64) -> impl Iterator<Item = [f64; 2]> {
    (0..RING_SIZE).map(move |i| {
        let a = std::f64::consts::TAU * i as f64 / RING_SIZE as f64;
        [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
    })
}

/// X-points of one node: at most one on each side along the nodal-line
/// direction, within one node spacing (twice the N–Y distance). The X-point
/// ahead of a fast node sits next to the following node, so seeds also
/// surround the neighbouring nodes. `seeds` are offsets tried first; when they
/// already cover every side the default seeds are skipped.
pub fn find_x_points(
    model: &WavefunctionModel,
    node: &NodalPoint,
    seeds: &[[f64; 2]],
    opts: &CriticalPointOptions,
) -> Result<XPointSearch> {
    if !(node
        .position
        .iter()
        .chain(&node.velocity)
        .all(|v| v.is_finite()))
    {
        return Err(Error::InvalidParameter("nodal point is not finite".into()));
    }
    let frame = node_frame(model, node).ok_or(Error::NearEscape { t: node.t })?;
    let right = frame.right;
    let d_y = frame
        .ys
        .iter()
        .map(|&y| dist(y, node.position))
        .fold(f64::INFINITY, f64::min);
    if !(d_y > 0.0 && d_y.is_finite()) {
        return Err(Error::NearEscape { t: node.t });
    }
    let reach = 2.0 * d_y;
    let two_sided = matches!(model, WavefunctionModel::TwoQubit(_));
    let expected_sides = if two_sided { 2 } else { 1 };
    let proj = |w: [f64; 2]| w[0] * right[0] + w[1] * right[1];

    let mut roots: Vec<([f64; 2], f64, Mat2)> = Vec::new();
    let try_seed = |w0: [f64; 2], roots: &mut Vec<([f64; 2], f64, Mat2)>| {
        if let Some((w, r, j)) = refine_x_point(model, node, w0, opts) {
            if norm(w) < reach
                && roots
                    .iter()
                    .all(|(o, _, _)| dist(*o, w) > opts.dedup_radius)
            {
                roots.push((w, r, j));
            }
        }
    };
    let sides_found = |roots: &[([f64; 2], f64, Mat2)]| {
        let r = roots.iter().any(|(w, _, _)| proj(*w) >= 0.0);
        let l = roots.iter().any(|(w, _, _)| proj(*w) < 0.0);
        l as usize + r as usize
    };

    for &s in seeds {
        try_seed(s, &mut roots);
    }
    if sides_found(&roots) < expected_sides {
        let mut defaults: Vec<[f64; 2]> = frame
            .ys
            .iter()
            .map(|y| {
                [
                    0.5 * (y[0] - node.position[0]),
                    0.5 * (y[1] - node.position[1]),
                ]
            })
            .collect();
        for frac in RING_RADII {
            defaults.extend(ring([0.0, 0.0], frac * d_y));
        }
        for &n in &frame.neighbours {
            for frac in NEIGHBOUR_RING_RADII {
                defaults.extend(ring(n, frac * d_y));
            }
        }
        for s in defaults {
            try_seed(s, &mut roots);
            if sides_found(&roots) == expected_sides {
                break;
            }
        }
    }

    let mut search = XPointSearch::default();
    for side in [Side::Left, Side::Right] {
        let mut candidates: Vec<&([f64; 2], f64, Mat2)> = roots
            .iter()
            .filter(|(w, _, _)| (proj(*w) >= 0.0) == (side == Side::Right))
            .collect();
        candidates.sort_by(|a, b| norm(a.0).total_cmp(&norm(b.0)));
        match candidates.first() {
            Some(&&(w, r, j)) => {
                search.anomalies += candidates.len() - 1;
                search.points.push(XPoint {
                    node_k: node.k,
                    side,
                    offset: w,
                    position_inertial: [node.position[0] + w[0], node.position[1] + w[1]],
                    jacobian: j,
                    classification: classify_fixed_point(&j).ok(),
                    residual: r,
                    t: node.t,
                });
            }
            None if two_sided => search.failed.push(side),
            None => {}
        }
    }
    if !two_sided && search.points.is_empty() {
        search.failed.push(Side::Right);
    }
    if search.anomalies > 0 {
        debug!(
            "node k={} at t={}: {} extra X-point roots",
            node.k, node.t, search.anomalies
        );
    }
    Ok(search)
}

#[cfg(test)]
mod tests {
    use super::super::{nodal_points, FixedPointKind, KWindow};
    use super::*;
    use crate::model::{make_two_qubit, OscillatorFrequencies, SingleNodeModel};

    #[test]
    fn single_node_has_one_saddle_x_point() {
        let m: WavefunctionModel = SingleNodeModel::new(
            1.0,
            1.0,
            0.5_f64.sqrt(),
            OscillatorFrequencies::irrational_default(),
        )
        .unwrap()
        .into();
        let opts = CriticalPointOptions::default();
        let node = nodal_points(&m, 1.5, KWindow::default()).unwrap()[0];
        let s = find_x_points(&m, &node, &[], &opts).unwrap();
        assert_eq!(s.points.len(), 1, "{s:?}");
        let x = s.points[0];
        assert_eq!(x.classification.unwrap().kind, FixedPointKind::Saddle);
        // Brute-force Newton from a dense seed grid finds no other root nearby.
        for i in -15..=15 {
            for j in -15..=15 {
                if let Some((w, _, _)) =
                    refine_x_point(&m, &node, [0.1 * i as f64, 0.1 * j as f64], &opts)
                {
                    if norm(w) < 1.5 {
                        assert!(dist(w, x.offset) < 1e-8, "{w:?} vs {:?}", x.offset);
                    }
                }
            }
        }
    }

    #[test]
    fn two_x_points_per_node() {
        let m: WavefunctionModel = make_two_qubit(
            0.5_f64.sqrt(),
            2.5,
            OscillatorFrequencies::irrational_default(),
        )
        .unwrap()
        .into();
        let opts = CriticalPointOptions::default();
        for node in nodal_points(&m, 1.5, KWindow::symmetric(7)).unwrap() {
            let s = find_x_points(&m, &node, &[], &opts).unwrap();
            assert_eq!(s.points.len(), 2, "k={} {s:?}", node.k);
            let l = s.on_side(Side::Left).unwrap().offset;
            let r = s.on_side(Side::Right).unwrap().offset;
            assert!(l[0] < 0.0 && r[0] > 0.0);
            for x in &s.points {
                assert!(x.residual < 1e-10);
                let again = refine_x_point(&m, &node, x.offset, &opts).unwrap();
                assert!(again.1 < 1e-10);
            }
        }
    }
}
