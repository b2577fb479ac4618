use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use htcp_bench::{point, tensor};
use htcp_core::{Matrix, Tensor};
use std::hint::black_box;

fn power_map(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_power");
    for (m, n) in [(3, 3), (4, 4), (5, 4), (4, 8)] {
        let t = tensor(m, n);
        let x = point(n);
        group.bench_with_input(BenchmarkId::from_parameter(format!("m{m}n{n}")), &(t, x), |b, (t, x)| {
            b.iter(|| t.apply_power(black_box(x)).unwrap())
        });
    }
    group.finish();
}

fn jacobian(c: &mut Criterion) {
    let mut group = c.benchmark_group("jacobian");
    for (m, n) in [(3, 3), (4, 4), (5, 4)] {
        let t = tensor(m, n);
        let x = point(n);
        group.bench_with_input(BenchmarkId::from_parameter(format!("m{m}n{n}")), &(t, x), |b, (t, x)| {
            b.iter(|| t.jacobian(black_box(x)).unwrap())
        });
    }
    group.finish();
}

fn products(c: &mut Criterion) {
    let t = tensor(4, 3);
    c.bench_function("partial_symmetrize/m4n3", |b| b.iter(|| black_box(&t).partial_symmetrize().unwrap()));
    let m = Matrix::from_fn(3, 3, |i, j| (i + 2 * j) as f64 - 2.0);
    c.bench_function("right_mul_matrix/m4n3", |b| b.iter(|| black_box(&t).right_mul_matrix(&m).unwrap()));
    let e = tensor(3, 3);
    c.bench_function("shao_product/m4k3n3", |b| b.iter(|| black_box(&t).shao_product(&e).unwrap()));
    let eye = Tensor::identity(4, 3).unwrap();
    c.bench_function("shao_identity/m4n3", |b| b.iter(|| black_box(&eye).left_mul_matrix(&m).unwrap()));
}

criterion_group!(benches, power_map, jacobian, products);
criterion_main!(benches);
