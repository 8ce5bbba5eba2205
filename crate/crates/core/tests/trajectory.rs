use bohmflow::chaos::{detect_events, distance_channels, EventOptions};
use bohmflow::critical::CriticalPointOptions;
use bohmflow::trajectory::{
    default_xi0, integrate_with_deviation, shadow_stretching, IntegrationControls,
};
use bohmflow::{make_two_qubit, OscillatorFrequencies, WavefunctionModel};

fn two_qubit(c2: f64) -> WavefunctionModel {
    make_two_qubit(c2, 2.5, OscillatorFrequencies::irrational_default())
        .unwrap()
        .into()
}

/// The deviation equation is linear, so renormalizing only rescales ξ and
/// Σa up to a common instant is the same for any renormalization interval.
#[test]
fn a_cum_is_independent_of_renormalization_interval() {
    let m = two_qubit(0.6);
    let fine = IntegrationControls {
        renorm_dt: 0.01,
        t_final: 40.0,
        ..Default::default()
    };
    let coarse = IntegrationControls {
        renorm_dt: 0.2,
        ..fine
    };
    let a = integrate_with_deviation(&m, 0.5, 2.0, default_xi0(), &fine)
        .unwrap()
        .a_cum();
    let b = integrate_with_deviation(&m, 0.5, 2.0, default_xi0(), &coarse)
        .unwrap()
        .a_cum();
    for (i, bi) in b.iter().enumerate() {
        let ai = a[(i + 1) * 20 - 1];
        assert!(
            (ai - bi).abs() < 1e-6 * bi.abs().max(1.0),
            "interval {i}: {ai} vs {bi}"
        );
    }
}

#[test]
fn variational_and_shadow_agree() {
    let c = IntegrationControls {
        t_final: 30.0,
        atol: 1e-12,
        rtol: 1e-12,
        ..Default::default()
    };
    for (c2, start) in [
        (0.001, [3.54, -2.69]),
        (std::f64::consts::FRAC_1_SQRT_2, [0.0, 3.0]),
    ] {
        let m = two_qubit(c2);
        let var = integrate_with_deviation(&m, start[0], start[1], default_xi0(), &c).unwrap();
        let sh = shadow_stretching(&m, start[0], start[1], 1e-8, &c).unwrap();
        assert_eq!(sh.len(), var.stretching.len());
        for (s, v) in sh.iter().zip(&var.stretching) {
            assert!((s - v).abs() < 1e-3, "c2 = {c2}: {s} vs {v}");
        }
    }
}

#[test]
fn ordered_trajectory_has_no_events() {
    let m = two_qubit(0.001);
    let rec =
        integrate_with_deviation(&m, 3.54, -2.69, default_xi0(), &Default::default()).unwrap();
    assert!(rec.status.is_completed());
    let ch = distance_channels(&rec, &m, &CriticalPointOptions::default());
    assert!(detect_events(&ch, None, &EventOptions::default()).is_empty());
}

/// ln|ξ(t)| of the never-renormalized deviation vector is Σa.
#[test]
fn deviation_log_norm_is_cumulative_stretching() {
    let m = two_qubit(0.4);
    let rec = integrate_with_deviation(&m, -1.0, 1.5, default_xi0(), &Default::default()).unwrap();
    for (l, a) in rec.deviation_log_norms.iter().zip(rec.a_cum()) {
        assert!((l - a).abs() < 1e-12 * a.abs().max(1.0));
    }
}
