use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};
use volterra_core::{
    discretize_measure, simulate_lift, simulate_volterra, KernelSpec, LaplaceMeasure, ModelParams,
};

fn simulation(c: &mut Criterion) {
    let m = ModelParams::heston(2.0, 0.04, 0.3, -0.7, 0.04).unwrap();
    let rough = KernelSpec::rough(0.6).unwrap();
    let mut g = c.benchmark_group("simulate");
    g.bench_function("volterra rough 200x1000", |b| {
        b.iter(|| simulate_volterra(&rough, &m, 1.0, 200, 1000, black_box(1), true).unwrap())
    });
    g.bench_function("volterra constant 200x1000", |b| {
        b.iter(|| {
            simulate_volterra(
                &KernelSpec::constant(1.0),
                &m,
                1.0,
                200,
                1000,
                black_box(1),
                true,
            )
            .unwrap()
        })
    });
    let atoms = discretize_measure(&LaplaceMeasure::rough(0.6), 50, 1e6).unwrap();
    g.bench_function("lift 50 atoms 200x1000", |b| {
        b.iter(|| simulate_lift(&atoms, &m, 1.0, 200, 1000, black_box(1)).unwrap())
    });
    g.finish();
}

criterion_group!(
    name = benches;
    config = Criterion::default().sample_size(10).measurement_time(Duration::from_secs(5));
    targets = simulation
);
criterion_main!(benches);
