use criterion::{criterion_group, criterion_main, Criterion};
use flowbox_core::chart::{Chart, Surface, SurfaceSpec};
use flowbox_core::dynsys::builtin;
use flowbox_core::odeint::{flow, IntegratorConfig};
use std::hint::black_box;

fn bench_flow(c: &mut Criterion) {
    let cfg = IntegratorConfig::default();
    let lc = builtin("limit-cycle").unwrap();
    c.bench_function("flow limit-cycle t=2π", |b| {
        b.iter(|| flow(&lc, black_box(&[0.5, 0.1]), std::f64::consts::TAU, &cfg).unwrap())
    });
}

fn bench_chart(c: &mut Criterion) {
    let field = builtin("source-a").unwrap();
    let surface = Surface::from_spec(&SurfaceSpec::default_for("source-a").unwrap()).unwrap();
    let chart = Chart::new(field, surface, IntegratorConfig::default()).unwrap();
    c.bench_function("chart locate source-a", |b| {
        b.iter(|| chart.locate(black_box(&[1.7, -0.4])).unwrap())
    });
}

criterion_group!(benches, bench_flow, bench_chart);
criterion_main!(benches);
