use super::xpoint::XPoint;
use super::{nodal_point, NodalPoint};
use crate::error::{Error, Result};
use crate::integrator::{Dopri5, StepControl};
use crate::model::WavefunctionModel;

/// Half-width of the co-moving box outside which tracing stops.
pub const MANIFOLD_BOX: f64 = 10.0;
const MAX_STEPS: usize = 100_000;

/// Unstable (forward in `s`) and stable (backward in `s`) branches, each a
/// polyline of co-moving offsets starting next to the X-point.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticCurves {
    pub unstable: [Vec<[f64; 2]>; 2],
    pub stable: [Vec<[f64; 2]>; 2],
}

/// Co-moving velocity at offset `w` with time frozen at the node's instant.
pub fn frozen_comoving_field(
    model: &WavefunctionModel,
    node: &NodalPoint,
    w: [f64; 2],
) -> Result<[f64; 2]> {
    let v = model.velocity(node.position[0] + w[0], node.position[1] + w[1], node.t)?;
    Ok([v.vx - node.velocity[0], v.vy - node.velocity[1]])
}

fn trace_branch(
    model: &WavefunctionModel,
    node: &NodalPoint,
    start: [f64; 2],
    direction: f64,
    arc_length: f64,
) -> Vec<[f64; 2]> {
    let mut rhs = |_s: f64, w: &[f64; 2]| frozen_comoving_field(model, node, *w).ok();
    let ctrl = StepControl {
        atol: 1e-10,
        rtol: 1e-10,
        h_max: arc_length / 50.0,
        ..StepControl::default()
    };
    let mut out = vec![start];
    let Ok(mut solver) = Dopri5::new(ctrl, &mut rhs, 0.0, start, direction) else {
        return out;
    };
    let mut length = 0.0;
    for _ in 0..MAX_STEPS {
        if solver.step(&mut rhs, direction * f64::INFINITY).is_err() {
            break;
        }
        let w = *solver.y();
        let last = *out.last().unwrap();
        length += (w[0] - last[0]).hypot(w[1] - last[1]);
        out.push(w);
        if length >= arc_length || w[0].abs() > MANIFOLD_BOX || w[1].abs() > MANIFOLD_BOX {
            break;
        }
    }
    out
}

/// Trace the four asymptotic curves of a saddle X-point in the frozen-time
/// co-moving field, starting `epsilon` away along each eigenvector.
pub fn trace_asymptotic_curves(
    model: &WavefunctionModel,
    x_point: &XPoint,
    arc_length: f64,
    epsilon: f64,
) -> Result<AsymptoticCurves> {
    let class = x_point.classification.ok_or(Error::NotSaddle)?;
    let (Some(eu), Some(es)) = (class.unstable_direction(), class.stable_direction()) else {
        return Err(Error::NotSaddle);
    };
    if !(arc_length > 0.0 && epsilon > 0.0) {
        return Err(Error::InvalidParameter(
            "arc_length and epsilon must be positive".into(),
        ));
    }
    let node = nodal_point(model, x_point.node_k, x_point.t)?;
    let o = x_point.offset;
    let along =
        |e: [f64; 2], sign: f64| [o[0] + sign * epsilon * e[0], o[1] + sign * epsilon * e[1]];
    Ok(AsymptoticCurves {
        unstable: [1.0, -1.0].map(|s| trace_branch(model, &node, along(eu, s), 1.0, arc_length)),
        stable: [1.0, -1.0].map(|s| trace_branch(model, &node, along(es, s), -1.0, arc_length)),
    })
}

#[cfg(test)]
mod tests {
    use super::super::{find_x_points, nodal_points, CriticalPointOptions, KWindow};
    use super::*;
    use crate::model::{OscillatorFrequencies, SingleNodeModel};

    #[test]
    fn curves_leave_the_x_point_and_field_vanishes_there() {
        let m: WavefunctionModel = SingleNodeModel::new(
            1.0,
            1.0,
            0.5_f64.sqrt(),
            OscillatorFrequencies::irrational_default(),
        )
        .unwrap()
        .into();
        let node = nodal_points(&m, 1.5, KWindow::default()).unwrap()[0];
        let x = find_x_points(&m, &node, &[], &CriticalPointOptions::default())
            .unwrap()
            .points[0];
        let f = frozen_comoving_field(&m, &node, x.offset).unwrap();
        assert!(f[0].hypot(f[1]) < 1e-10);
        let curves = trace_asymptotic_curves(&m, &x, 2.0, 1e-6).unwrap();
        for branch in curves.unstable.iter().chain(&curves.stable) {
            let length: f64 = branch
                .windows(2)
                .map(|p| (p[1][0] - p[0][0]).hypot(p[1][1] - p[0][1]))
                .sum();
            assert!(length > 1.0, "{length}");
        }
        // Following the unstable branch backwards in s returns to the X-point.
        let start = curves.unstable[0][curves.unstable[0].len() / 20];
        let back = trace_branch(&m, &node, start, -1.0, 1.0);
        let closest = back
            .iter()
            .map(|w| (w[0] - x.offset[0]).hypot(w[1] - x.offset[1]))
            .fold(f64::INFINITY, f64::min);
        assert!(closest < 1e-4, "{closest}");
    }
}
