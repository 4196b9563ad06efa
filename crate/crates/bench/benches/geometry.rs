use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use uminimal_core::gallery::{self, Veronese};
use uminimal_core::haar::{FrameSet, Group};
use uminimal_core::minimality::{first_variation_check, minimality_residual, NormalField};
use uminimal_core::submanifold::shape_system;
use uminimal_core::MultiIndex;

fn point_data(c: &mut Criterion) {
    let veronese = Veronese::new().unwrap();
    let enneper = gallery::enneper().unwrap();
    c.bench_function("shape_system/veronese", |b| {
        b.iter(|| shape_system(&veronese, black_box(&[0.7, 1.3])).unwrap())
    });
    c.bench_function("shape_system/enneper_fd", |b| {
        b.iter(|| shape_system(&enneper, black_box(&[0.2, -0.3])).unwrap())
    });
}

fn residuals(c: &mut Criterion) {
    let mut group = c.benchmark_group("mesh");
    group.sample_size(10);
    let veronese = Veronese::new().unwrap();
    let frames = FrameSet::exact(2, Group::O, 64).unwrap();
    let u = MultiIndex::new(vec![2, 0]);
    group.bench_function("minimality_residual/veronese_res32", |b| {
        b.iter(|| minimality_residual(&veronese, &u, 32, &frames, 1e-6).unwrap())
    });

    let torus = gallery::revolution_torus(3.0, 1.0).unwrap();
    let frames = FrameSet::exact(1, Group::O, 2).unwrap();
    let field = NormalField::random(&torus, 7, 2, 0.1);
    let u = MultiIndex::new(vec![1]);
    group.bench_function("first_variation/torus_res24", |b| {
        b.iter(|| first_variation_check(&torus, &field, &u, 24, &frames, &[1e-2, 5e-3]).unwrap())
    });
    group.finish();
}

criterion_group!(benches, point_data, residuals);
criterion_main!(benches);
