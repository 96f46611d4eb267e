use criterion::{criterion_group, criterion_main, Criterion};
use momray_core::weyl::{verify_collapse_family, verify_commutator_family};
use momray_core::WeylElement;
use std::hint::black_box;

fn multiply(c: &mut Criterion) {
    let t = WeylElement::transport(3);
    let t4 = t.pow(4);
    let d = WeylElement::dxi(3, 0).mul(&WeylElement::dxi(3, 1)).unwrap();
    c.bench_function("weyl transport^4 * d_xi0 d_xi1", |b| b.iter(|| black_box(t4.mul(&d).unwrap())));
    c.bench_function("weyl transport^4", |b| b.iter(|| black_box(t.pow(4))));
}

fn families(c: &mut Criterion) {
    let mut group = c.benchmark_group("weyl families");
    group.sample_size(10);
    group.bench_function("commutator n<=2 k<=2 l<=3", |b| {
        b.iter(|| black_box(verify_commutator_family(2, 2, 3, 4, 0).unwrap()))
    });
    group.bench_function("collapse n<=3 m<=2", |b| b.iter(|| black_box(verify_collapse_family(3, 2, 4, 0).unwrap())));
    group.finish();
}

criterion_group!(benches, multiply, families);
criterion_main!(benches);
