use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use tasep_core::{bethe, correlator, detforms, oracle, Complex64, RingShape};

fn bench_bethe_solve(c: &mut Criterion) {
    let shape = RingShape::new(6, 3).unwrap();
    c.bench_function("bethe_solve_all_6_3", |b| {
        b.iter(|| bethe::solve_all(black_box(shape), bethe::DEFAULT_TOL).unwrap())
    });
}

fn bench_correlation(c: &mut Criterion) {
    let shape = RingShape::new(8, 3).unwrap();
    let cat = bethe::solve_all(shape, bethe::DEFAULT_TOL).unwrap();
    c.bench_function("correlation_8_3", |b| {
        b.iter(|| correlator::correlation(black_box(shape), 4, 1.0, &cat).unwrap())
    });
}

fn bench_oracle_evolve(c: &mut Criterion) {
    let shape = RingShape::new(8, 4).unwrap();
    let gen = oracle::build_generator(shape).unwrap();
    let v = tasep_core::combinat::steady_state_vector(shape);
    c.bench_function("oracle_evolve_8_4", |b| {
        b.iter(|| oracle::evolve(&gen, black_box(&v), 1.0).unwrap())
    });
}

fn bench_scalar_product(c: &mut Criterion) {
    let n = 4;
    let v: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(0.9 + 0.13 * i as f64, 0.27 - 0.09 * i as f64))
        .collect();
    let u: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(0.8 - 0.07 * i as f64, -0.21 + 0.15 * i as f64))
        .collect();
    c.bench_function("scalar_product_m10_n4", |b| {
        b.iter(|| detforms::scalar_product(black_box(&v), black_box(&u), 10).unwrap())
    });
}

criterion_group!(
    benches,
    bench_bethe_solve,
    bench_correlation,
    bench_oracle_evolve,
    bench_scalar_product
);
criterion_main!(benches);
