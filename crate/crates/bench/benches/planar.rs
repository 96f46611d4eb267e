use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use momray_bench::field;
use momray_core::planar2d::{moment_conditions, moment_integral};
use momray_core::reduction::{reduce_via_transport, transform_tuple};
use std::hint::black_box;

fn moments(c: &mut Criterion) {
    let mut group = c.benchmark_group("planar moments");
    for m in 0..=2 {
        let f = field(m, 2);
        group.bench_with_input(BenchmarkId::new("integral r=3", m), &f, |b, f| {
            b.iter(|| black_box(moment_integral(f, m, 3, 0.7).unwrap()))
        });
    }
    group.sample_size(10);
    let f = field(2, 2);
    group.bench_function("conditions m=2 rmax=3", |b| b.iter(|| black_box(moment_conditions(&f, 3).unwrap())));
    group.finish();
}

fn reduction(c: &mut Criterion) {
    let mut group = c.benchmark_group("reduction");
    group.sample_size(10);
    let tuple = transform_tuple(&field(2, 3));
    group.bench_function("psi_01 from psi^2", |b| {
        b.iter(|| black_box(reduce_via_transport(&tuple[2], &[0, 1]).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, moments, reduction);
criterion_main!(benches);
