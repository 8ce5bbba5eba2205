use std::hint::black_box;

use bohmflow::critical::{find_x_points, nodal_point, CriticalPointOptions};
use bohmflow::trajectory::{default_xi0, integrate, integrate_with_deviation, IntegrationControls};
use bohmflow::{make_two_qubit, OscillatorFrequencies, WavefunctionModel};
use criterion::{criterion_group, criterion_main, Criterion};

fn model() -> WavefunctionModel {
    make_two_qubit(
        std::f64::consts::FRAC_1_SQRT_2,
        2.5,
        OscillatorFrequencies::irrational_default(),
    )
    .unwrap()
    .into()
}

fn field(c: &mut Criterion) {
    let m = model();
    c.bench_function("velocity", |b| {
        b.iter(|| m.velocity(black_box(0.7), black_box(-1.3), black_box(2.1)))
    });
    c.bench_function("velocity_jacobian", |b| {
        b.iter(|| m.velocity_jacobian(black_box(0.7), black_box(-1.3), black_box(2.1)))
    });
    c.bench_function("psi", |b| {
        b.iter(|| m.psi(black_box(0.7), black_box(-1.3), black_box(2.1)))
    });
}

fn trajectories(c: &mut Criterion) {
    let m = model();
    let ctl = IntegrationControls {
        t_final: 20.0,
        ..Default::default()
    };
    c.bench_function("dopri5_trajectory_t20", |b| {
        b.iter(|| integrate(&m, black_box(0.0), 3.0, &ctl))
    });
    c.bench_function("dopri5_deviation_t20", |b| {
        b.iter(|| integrate_with_deviation(&m, black_box(0.0), 3.0, default_xi0(), &ctl))
    });
}

fn critical(c: &mut Criterion) {
    let m = model();
    let node = nodal_point(&m, 1, 1.5).unwrap();
    let opts = CriticalPointOptions::default();
    c.bench_function("find_x_points", |b| {
        b.iter(|| find_x_points(&m, black_box(&node), &[], &opts))
    });
}

criterion_group!(benches, field, trajectories, critical);
criterion_main!(benches);
