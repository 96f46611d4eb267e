use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use momray_bench::{field, points};
use momray_core::johnop::{canonical_chains, john_residuals_exact, john_residuals_fd, lifted_psi, DEFAULT_STEP};
use momray_core::lift::MomentumDataSet;
use momray_core::TransformRep;
use std::hint::black_box;

fn exact_chains(c: &mut Criterion) {
    let mut group = c.benchmark_group("john exact");
    group.sample_size(10);
    let pts = points(3, 10);
    for m in 0..=2 {
        let rep = TransformRep::transform(m, &field(m, 3));
        let chains = canonical_chains(3, m + 1);
        group.bench_with_input(BenchmarkId::from_parameter(m), &rep, |b, rep| {
            b.iter(|| black_box(john_residuals_exact(rep, &chains, &pts).unwrap()))
        });
    }
    group.finish();
}

fn fd_chains(c: &mut Criterion) {
    let pts = points(3, 10);
    let psi = lifted_psi(&MomentumDataSet::from_field(&field(0, 3)));
    let chains = canonical_chains(3, 1);
    c.bench_function("john fd single", |b| {
        b.iter(|| black_box(john_residuals_fd(&psi, &chains, &pts, DEFAULT_STEP, 1).unwrap()))
    });
}

criterion_group!(benches, exact_chains, fd_chains);
criterion_main!(benches);
