use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gesp_core::kl::{decompose_kernel, DEFAULT_ZERO_TOL};
use gesp_core::*;

fn nystrom(c: &mut Criterion) {
    let mut group = c.benchmark_group("nystrom");
    group.sample_size(10);
    for p in [128usize, 256, 512] {
        let grid = build_grid(1, 20.0, p, QuadratureRule::GaussLegendre).unwrap();
        let mu = WeightedMeasure::new(&grid, 0);
        let kernel = CovarianceKernel::gaussian(1.0);
        group.bench_with_input(BenchmarkId::from_parameter(p), &p, |b, _| {
            b.iter(|| decompose_kernel(&kernel, &grid, &mu, 64, DEFAULT_ZERO_TOL).unwrap())
        });
    }
    group.finish();
}

fn bessel(c: &mut Criterion) {
    let mut group = c.benchmark_group("bessel");
    for (d, p) in [(1usize, 4096usize), (2, 128)] {
        let grid = build_grid(d, 10.0, p, QuadratureRule::Trapezoid).unwrap();
        let phi = grid.sample(|x| (-x.iter().map(|t| t * t).sum::<f64>() / 2.0).exp());
        group.bench_function(format!("{d}d-{p}"), |b| b.iter(|| bessel_potential(&phi, 1.0, &grid).unwrap()));
    }
    group.finish();
}

fn realize(c: &mut Criterion) {
    let grid = Arc::new(build_grid(1, 20.0, 256, QuadratureRule::GaussLegendre).unwrap());
    let color =
        color_factorize(&CovarianceKernel::gaussian(1.0), 0, 0, grid.clone(), 64, 1, &FactorizationOptions::default())
            .unwrap();
    let bank = build_bank(8, &grid).unwrap();
    let mut group = c.benchmark_group("realize");
    group.sample_size(10);
    group.bench_function("expansion-1000", |b| b.iter(|| color.expansion.realize(1, &bank, 1000).unwrap()));
    group.bench_function("colored-noise-1000", |b| {
        b.iter(|| color.white_noise.realize_through(&color.operator, &bank, 1000).unwrap())
    });
    group.finish();
}

criterion_group!(benches, nystrom, bessel, realize);
criterion_main!(benches);
