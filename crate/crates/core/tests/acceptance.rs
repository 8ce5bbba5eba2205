//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Runs without the libtest harness.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::time::Instant;

use bohmflow::chaos::{
    detect_events, detect_vortices, distance_channels, lcn_series, lcn_with_class, ClassifyOptions,
    EventOptions, TrajectoryClass,
};
use bohmflow::critical::{
    check_escape_guard, escape_times, find_x_points, nodal_point, nodal_points, y_points,
    CriticalLine, CriticalPointOptions, KWindow,
};
use bohmflow::ensemble::{
    colorplot_run, frobenius_distance, lcn_distribution, run_ensemble, ColorplotSpec,
    EnsembleOptions, GridSpec, Sampling, SweepRow,
};
use bohmflow::periodicity::periodicity_check;
use bohmflow::trajectory::{
    default_xi0, integrate_with_deviation, shadow_stretching, IntegrationControls,
};
use bohmflow::{make_two_qubit, OscillatorFrequencies, SingleNodeModel, WavefunctionModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn two_qubit(c2: f64) -> WavefunctionModel {
    make_two_qubit(c2, 2.5, OscillatorFrequencies::irrational_default())
        .unwrap()
        .into()
}

/// Controls used for figure reproductions (sampling and renormalization at 0.01).
fn figure_controls(t_final: f64) -> IntegrationControls {
    IntegrationControls {
        dt_sample: 0.01,
        renorm_dt: 0.01,
        t_final,
        ..Default::default()
    }
}

fn x_point_regression() -> Outcome {
    let m: WavefunctionModel = SingleNodeModel::new(
        1.0,
        1.0,
        FRAC_1_SQRT_2,
        OscillatorFrequencies::irrational_default(),
    )
    .unwrap()
    .into();
    let node = nodal_point(&m, 0, 1.5).unwrap();
    let search = find_x_points(&m, &node, &[], &CriticalPointOptions::default()).unwrap();
    let want = [-0.2123, -0.5132];
    match search.points.first() {
        Some(x) => {
            let ok = (x.offset[0] - want[0]).abs() < 1e-3 && (x.offset[1] - want[1]).abs() < 1e-3;
            outcome(
                ok,
                format!(
                    "(u,v) = ({:.4}, {:.4}), expected ({}, {})",
                    x.offset[0], x.offset[1], want[0], want[1]
                ),
            )
        }
        None => outcome(false, "no X-point found"),
    }
}

fn critical_identities() -> Outcome {
    let m = two_qubit(FRAC_1_SQRT_2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w = KWindow::symmetric(11);
    let (mut psi, mut vy, mut vx, mut jac, mut n_x) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0);
    let mut times = 0;
    while times < 50 {
        let t = rng.gen_range(0.05..20.0);
        if check_escape_guard(&m, t, 1e-3).is_err() {
            continue;
        }
        times += 1;
        let scale = m.psi(0.0, 0.0, t).norm().max(1.0);
        for n in nodal_points(&m, t, w).unwrap() {
            psi = psi.max(m.psi(n.position[0], n.position[1], t).norm() / scale);
            for x in find_x_points(&m, &n, &[], &CriticalPointOptions::default())
                .unwrap()
                .points
            {
                let v = m
                    .velocity(x.position_inertial[0], x.position_inertial[1], t)
                    .unwrap();
                vx = vx.max((v.vx - n.velocity[0]).hypot(v.vy - n.velocity[1]));
                n_x += 1;
            }
        }
        for y in y_points(&m, t, w).unwrap() {
            vy = vy.max(m.velocity(y.position[0], y.position[1], t).unwrap().speed());
        }
        let (x, y) = (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
        let j = m.velocity_jacobian(x, y, t).unwrap();
        let h = 1e-6;
        let v = |x: f64, y: f64| m.velocity(x, y, t).unwrap().as_array();
        let (xp, xm, yp, ym) = (v(x + h, y), v(x - h, y), v(x, y + h), v(x, y - h));
        let fd = [
            [(xp[0] - xm[0]), (yp[0] - ym[0])],
            [(xp[1] - xm[1]), (yp[1] - ym[1])],
        ];
        let scale = j.max_abs().max(1.0);
        for (r, row) in fd.iter().enumerate() {
            for (c, d) in row.iter().enumerate() {
                jac = jac.max((j.0[r][c] - d / (2.0 * h)).abs() / scale);
            }
        }
    }
    let ok = psi < 1e-9 && vy < 1e-9 && vx < 1e-10 && jac < 1e-5 && n_x > 0;
    outcome(
        ok,
        format!("50 times: |Ψ(N)| {psi:.1e}, |v(Y)| {vy:.1e}, co-moving |v(X)| {vx:.1e} over {n_x} X-points, Jacobian rel. err {jac:.1e}"),
    )
}

fn escape_geometry() -> Outcome {
    let m = two_qubit(FRAC_1_SQRT_2);
    let t_inf = PI / (3f64.sqrt() - 1.0);
    let esc = escape_times(&m, 20.0).unwrap();
    let exact = esc.len() == 4
        && esc
            .iter()
            .enumerate()
            .all(|(i, t)| (t - (i + 1) as f64 * t_inf).abs() < 1e-12);
    let line = CriticalLine::at(&m, 1e-6).unwrap();
    let slope = line.step[1] / line.step[0];
    let ok =
        exact && (slope - 0.76).abs() < 1e-2 && (slope - 37f64.to_radians().tan()).abs() < 1e-2;
    outcome(
        ok,
        format!(
            "t∞ = {:.6} (π/(√3−1) = {t_inf:.6}), nodal-line slope at t=1e-6: {slope:.4}",
            esc[0]
        ),
    )
}

fn event_anatomy() -> Outcome {
    let m = two_qubit(0.001);
    let c = figure_controls(20.0);
    let r = integrate_with_deviation(&m, 0.0, 3.0, default_xi0(), &c).unwrap();
    let lcn = lcn_series(&r.stretching, c.renorm_dt);
    let ch = distance_channels(&r, &m, &CriticalPointOptions::default());
    let ev = detect_events(&ch, Some(&lcn), &EventOptions::default());
    if ev.len() != 5 {
        return outcome(false, format!("{} events, expected 5", ev.len()));
    }
    let seq_ok = ev[0].involved_k == [-3, -5, -7, -9];
    let expect = [0.2, 0.2, 0.6, 0.2, 0.2];
    let mins: Vec<f64> = ev.iter().map(|e| e.min_d_n).collect();
    let mins_ok = mins.iter().zip(expect).all(|(m, e)| (m - e).abs() <= 0.1);
    // Mean |a_cum| drift rate between events against the rate inside events.
    let a_at = |t: f64| {
        let i = lcn.times.partition_point(|&s| s <= t + 1e-9);
        if i == 0 {
            0.0
        } else {
            lcn.a_cum[i - 1]
        }
    };
    let (mut gap_drift, mut gap_time, mut ev_drift, mut ev_time, mut prev) =
        (0.0, 0.0, 0.0, 0.0, 0.0);
    for e in &ev {
        gap_drift += (a_at(e.t_start) - a_at(prev)).abs();
        gap_time += e.t_start - prev;
        ev_drift += e.a_cum_delta.abs();
        ev_time += e.t_end - e.t_start;
        prev = e.t_end;
    }
    gap_drift += (a_at(c.t_final) - a_at(prev)).abs();
    gap_time += c.t_final - prev;
    let ratio = (gap_drift / gap_time) / (ev_drift / ev_time);
    let ok = seq_ok && mins_ok && ratio < 0.1;
    outcome(
        ok,
        format!(
            "5 events, A visits {:?}, min D_N {:?}, a_cum drift rate between/inside events {ratio:.3}",
            ev[0].involved_k,
            mins.iter().map(|m| (m * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    )
}

fn vortex() -> Outcome {
    let m = two_qubit(0.3);
    let r = integrate_with_deviation(&m, -2.5654, 3.6585, default_xi0(), &figure_controls(10.0))
        .unwrap();
    let ch = distance_channels(&r, &m, &CriticalPointOptions::default());
    let opts = EventOptions::default();
    let vortices = detect_vortices(&ch, &opts);
    let events = detect_events(&ch, None, &opts);
    let in_events: Vec<f64> = ch
        .times
        .iter()
        .zip(&ch.node_speed)
        .filter(|(t, s)| s.is_finite() && events.iter().any(|e| (e.t_start..=e.t_end).contains(*t)))
        .map(|(_, s)| *s)
        .collect();
    let event_mean = in_events.iter().sum::<f64>() / in_events.len().max(1) as f64;
    let hit: Vec<_> = vortices
        .iter()
        .filter(|v| {
            v.node_k == 1
                && (v.t_start - 6.0).abs() <= 0.2
                && (v.t_end - 6.8).abs() <= 0.2
                && v.winding.abs() >= 2.0
        })
        .collect();
    let ok = vortices.len() == 1 && hit.len() == 1 && hit[0].mean_node_speed < event_mean;
    let found: Vec<String> = vortices
        .iter()
        .map(|v| {
            format!(
                "k={} [{:.2}, {:.2}] winding {:.2}",
                v.node_k, v.t_start, v.t_end, v.winding
            )
        })
        .collect();
    outcome(
        ok,
        format!(
            "{} vortices {found:?}, expected one around k=1 in [6, 6.8]",
            vortices.len()
        ),
    )
}

fn ordered_trajectory() -> Outcome {
    let m = two_qubit(0.001);
    let c = figure_controls(1e4);
    let r = integrate_with_deviation(&m, 3.54, -2.69, default_xi0(), &c).unwrap();
    let n20 = (20.0 / c.renorm_dt).round() as usize;
    let max_a = r.stretching[..n20]
        .iter()
        .fold(0.0f64, |a, b| a.max(b.abs()));
    let lcn = lcn_with_class(&r.stretching, c.renorm_dt, &ClassifyOptions::default());
    let cls = lcn.classification.unwrap();
    let ok =
        max_a <= 5e-4 && (cls.slope + 1.0).abs() <= 0.1 && cls.class == TrajectoryClass::Ordered;
    outcome(
        ok,
        format!(
            "max |a| on [0,20] {max_a:.2e} (bound 5e-4), slope {:.3}, class {}",
            cls.slope, cls.class
        ),
    )
}

fn periodicity() -> Outcome {
    let m: WavefunctionModel = make_two_qubit(
        FRAC_1_SQRT_2,
        2.5,
        OscillatorFrequencies::new(1.0, 2.0).unwrap(),
    )
    .unwrap()
    .into();
    let c = IntegrationControls {
        atol: 1e-13,
        rtol: 1e-13,
        ..Default::default()
    };
    let mut ok = true;
    let mut worst = [0.0f64; 4];
    let mut slopes = Vec::new();
    for start in [[1.0, 1.0], [0.0, 3.0], [-2.0, 0.5], [2.5, -1.5]] {
        let r = periodicity_check(&m, start, 100, &c, &ClassifyOptions::default()).unwrap();
        ok &= r.passes()
            && (r.envelope_slope + 1.0).abs() <= 0.1
            && (r.period - 2.0 * PI).abs() < 1e-12;
        worst[0] = worst[0].max(r.max_speed_half_period);
        worst[1] = worst[1].max(r.max_retrace_error);
        worst[2] = worst[2].max(r.a_cum_period.abs());
        worst[3] = worst[3].max(r.max_abs_chi_at_periods);
        slopes.push((r.envelope_slope * 1000.0).round() / 1000.0);
    }
    outcome(
        ok,
        format!(
            "4 starts: |v(π)| {:.1e}, retrace {:.1e}, |a_cum(2π)| {:.1e}, max |χ(nT)| {:.1e}, envelope slopes {slopes:?}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn ergodicity() -> Outcome {
    let m = two_qubit(FRAC_1_SQRT_2);
    let c = IntegrationControls {
        t_final: 1e4,
        ..Default::default()
    };
    let spec = ColorplotSpec::default();
    let snaps = [2.5e3, 5e3];
    let a = colorplot_run(&m, [2.0, 2.0], &c, &spec, &snaps).unwrap();
    let b = colorplot_run(&m, [8.0, 10.0], &c, &spec, &snaps).unwrap();
    let early = frobenius_distance(&a.snapshots[0], &b.snapshots[0]).unwrap();
    let late = frobenius_distance(a.final_grid(), b.final_grid()).unwrap();
    let (half, full) = (&b.snapshots[1], b.final_grid());
    let inside = (full.inside_samples() - half.inside_samples()) as f64
        / (full.total_samples - half.total_samples).max(1) as f64;
    let done = a.summary.status.is_completed() && b.summary.status.is_completed();
    let ok = done && late < 0.5 * early && inside > 0.99;
    outcome(
        ok,
        format!(
            "Frobenius {early:.4} at 2.5e3 → {late:.4} at 1e4 (ratio {:.3}), (8,10) inside fraction over final half {inside:.4}; status (2,2) {:?}, (8,10) {:?}",
            late / early,
            a.summary.status,
            b.summary.status
        ),
    )
}

fn entanglement_trend() -> Outcome {
    let grid = GridSpec::square(-4.0, 4.0, 10);
    let c = IntegrationControls {
        t_final: 1e4,
        ..Default::default()
    };
    let cps = [2.5e3, 5e3, 1e4];
    let mut rows = Vec::new();
    for c2 in [0.5, 0.6, FRAC_1_SQRT_2] {
        let table =
            run_ensemble(&two_qubit(c2), &grid, &c, &cps, &EnsembleOptions::default()).unwrap();
        rows.push(SweepRow::from_table(c2, &table));
    }
    let deltas: Vec<f64> = rows
        .iter()
        .map(|r| r.delta_chi().unwrap_or(f64::NAN))
        .collect();
    let decreasing = deltas.windows(2).all(|w| w[1] < w[0]);
    let mut gaps_ok = true;
    let mut gaps = Vec::new();
    for r in rows.iter().filter(|r| r.c2 >= 0.6) {
        let m: Vec<f64> = r
            .checkpoint_means
            .iter()
            .map(|m| m.unwrap_or(f64::NAN))
            .collect();
        let (g1, g2) = ((m[1] - m[0]).abs(), (m[2] - m[1]).abs());
        gaps_ok &= g2 < g1;
        gaps.push(format!("c2={:.3}: {g1:.2e} → {g2:.2e}", r.c2));
    }
    let chaotic: Vec<usize> = rows.iter().map(|r| r.chaotic).collect();
    outcome(
        decreasing && gaps_ok,
        format!(
            "Δχ {:?} for c2 0.5/0.6/0.707 (chaotic {chaotic:?} of 100), mean-χ gaps {}",
            deltas
                .iter()
                .map(|d| format!("{d:.3e}"))
                .collect::<Vec<_>>(),
            gaps.join(", ")
        ),
    )
}

/// Fourth-order central difference of `f` at 0.
fn d5(f: impl Fn(f64) -> Option<f64>, h: f64) -> Option<f64> {
    Some((f(-2.0 * h)? - 8.0 * f(-h)? + 8.0 * f(h)? - f(2.0 * h)?) / (12.0 * h))
}

/// |∂ρ/∂t + ∇·(ρv)| / ρ with every derivative by finite differences; `None`
/// where ρ is negligible or the velocity is undefined.
fn continuity_residual(m: &WavefunctionModel, x: f64, y: f64, t: f64) -> Option<f64> {
    let rho = |x: f64, y: f64, t: f64| m.psi(x, y, t).norm_sqr();
    let r = rho(x, y, t);
    if r < 1e-12 {
        return None;
    }
    let h = 1e-5;
    let jx = |s: f64| {
        m.velocity(x + s, y, t)
            .ok()
            .map(|v| rho(x + s, y, t) * v.vx)
    };
    let jy = |s: f64| {
        m.velocity(x, y + s, t)
            .ok()
            .map(|v| rho(x, y + s, t) * v.vy)
    };
    let dt = d5(|s| Some(rho(x, y, t + s)), h)?;
    Some((dt + d5(jx, h)? + d5(jy, h)?).abs() / r)
}

/// The shadow pair separation (1e-8) must be resolved by the integrator, so
/// both methods run at tolerance 1e-12.
fn oracle_equivalence() -> Outcome {
    let c = IntegrationControls {
        t_final: 50.0,
        atol: 1e-12,
        rtol: 1e-12,
        ..Default::default()
    };
    let mut worst = 0.0f64;
    for (c2, start) in [(0.001, [3.54, -2.69]), (FRAC_1_SQRT_2, [0.0, 3.0])] {
        let m = two_qubit(c2);
        let var = integrate_with_deviation(&m, start[0], start[1], default_xi0(), &c).unwrap();
        let sh = shadow_stretching(&m, start[0], start[1], 1e-8, &c).unwrap();
        if sh.len() != var.stretching.len() {
            return outcome(false, "series lengths differ");
        }
        worst = sh
            .iter()
            .zip(&var.stretching)
            .fold(worst, |w, (a, b)| w.max((a - b).abs()));
    }
    let m = two_qubit(FRAC_1_SQRT_2);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut residual = 0.0f64;
    let mut n = 0;
    while n < 1000 {
        let (x, y, t) = (
            rng.gen_range(-3.5..3.5),
            rng.gen_range(-3.5..3.5),
            rng.gen_range(0.05..20.0),
        );
        if let Some(r) = continuity_residual(&m, x, y, t) {
            residual = residual.max(r);
            n += 1;
        }
    }
    outcome(
        worst < 1e-3 && residual < 1e-5,
        format!("max |a_var − a_shadow| {worst:.1e} for t ≤ 50; continuity residual (relative to |Ψ|²) {residual:.1e} at 1000 points"),
    )
}

fn distribution_shape() -> Outcome {
    let grid = GridSpec {
        sampling: Sampling::Random { seed: 11 },
        ..GridSpec::square(-4.0, 4.0, 1)
    };
    let grid = GridSpec {
        n_x: 20,
        n_y: 10,
        ..grid
    };
    let c = IntegrationControls {
        t_final: 1e4,
        ..Default::default()
    };
    let table = run_ensemble(
        &two_qubit(FRAC_1_SQRT_2),
        &grid,
        &c,
        &[1e4],
        &EnsembleOptions::default(),
    )
    .unwrap();
    match lcn_distribution(&table, 1e4) {
        Ok(d) => outcome(
            d.skewness.abs() < 0.5 && d.excess_kurtosis.abs() < 1.0,
            format!(
                "{} chaotic of {}: mean {:.3e}, std {:.3e}, skewness {:.3}, excess kurtosis {:.3}",
                d.summary.n,
                table.rows.len(),
                d.mean(),
                d.std_dev(),
                d.skewness,
                d.excess_kurtosis
            ),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("X-point regression", x_point_regression),
        ("critical-point identities", critical_identities),
        ("escape times and nodal line", escape_geometry),
        ("event anatomy", event_anatomy),
        ("vortex", vortex),
        ("ordered trajectory", ordered_trajectory),
        ("commensurable periodicity", periodicity),
        ("ergodicity", ergodicity),
        ("entanglement-convergence trend", entanglement_trend),
        ("oracle equivalence", oracle_equivalence),
        ("distribution shape", distribution_shape),
    ];
    let filter: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let o = run();
        failed += usize::from(!o.pass);
        let mark = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{mark} {id:>2} {name}: {} [{:.1} s]",
            o.detail,
            t0.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
