use criterion::{criterion_group, criterion_main, Criterion};
use flowbox_core::dynsys::builtin;
use flowbox_core::varfit::{fit, loss_gradient, FitConfig, GridField};
use std::hint::black_box;

fn bench_gradient(c: &mut Criterion) {
    let vf = builtin("linear-ar").unwrap();
    let g = GridField::from_fn(vec![4.0, 1.0], vec![6.0, 3.0], vec![64, 64], 2, |x| {
        vec![0.1 * x[0] + 0.05 * x[1], 0.05 * x[0] - 0.1 * x[1]]
    })
    .unwrap();
    let cfg = FitConfig::default();
    c.bench_function("loss_gradient 64x64", |b| {
        b.iter(|| loss_gradient(black_box(&g), &vf, &cfg).unwrap())
    });
}

fn bench_fit(c: &mut Criterion) {
    let vf = builtin("linear-ar").unwrap();
    let cfg = FitConfig::default();
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    group.bench_function("linear-ar 32x32", |b| {
        b.iter(|| fit(&vf, &[4.0, 1.0], &[6.0, 3.0], &[32, 32], &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_gradient, bench_fit);
criterion_main!(benches);
