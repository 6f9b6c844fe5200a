use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use patchvm::{
    ensemble_vm, generate_homogeneous, log_grid, ring_rms_ensemble, sweep, Geometry, HomogeneousParams,
    PolarField, QuadratureSpec,
};

fn reference() -> Geometry {
    Geometry::new(0.15, 0.015).unwrap()
}

fn sampling(c: &mut Criterion) {
    let g = reference();
    let map = generate_homogeneous(&g, 5e-4, 0.1, 0.2, 1).unwrap();
    let grid = QuadratureSpec::default().grid_for(&map, 1e-7).unwrap();
    c.bench_function("polar_field_sample", |b| {
        b.iter(|| PolarField::sample(black_box(&map), &grid).unwrap())
    });
    let field = PolarField::sample(&map, &grid).unwrap();
    c.bench_function("evaluate_one_distance", |b| b.iter(|| field.evaluate(black_box(1e-5), 5e-4).unwrap()));
}

fn sweeps(c: &mut Criterion) {
    let g = reference();
    let map = generate_homogeneous(&g, 5e-4, 0.1, 0.2, 1).unwrap();
    let d = log_grid(1e-7, 1e-2, 8).unwrap();
    c.bench_function("sweep_41_distances", |b| {
        b.iter(|| sweep(black_box(&map), &d, &QuadratureSpec::default()).unwrap())
    });
}

fn ensembles(c: &mut Criterion) {
    let g = reference();
    let p = HomogeneousParams { r0: 5e-4, v0: 0.1, jitter: 0.2 };
    let d = log_grid(1e-6, 1e-3, 8).unwrap();
    let nodes = log_grid(2.5e-3, 0.015, 10).unwrap();
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    group.bench_function("ensemble_vm_20", |b| {
        b.iter(|| ensemble_vm(&g, p, 20, black_box(7), &d, &QuadratureSpec::default()).unwrap())
    });
    group.bench_function("ring_rms_50", |b| {
        b.iter(|| ring_rms_ensemble(&g, p, 50, &nodes, black_box(7)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, sampling, sweeps, ensembles);
criterion_main!(benches);
