// Hot kernels: path stepping, cocycle transport, spectral solves, statistics

use cocycle_clt::brownian::{simulate_path, PathSpec};
use cocycle_clt::cocycle::{geodesic_sigma, random_frame, BasePoint};
use cocycle_clt::multilinear::{wedge_lognorm, KFrame};
use cocycle_clt::origami::{eierlegende_wollmilchsau, h2_three_square};
use cocycle_clt::spectral::{coercivity_constant, solve_poisson};
use cocycle_clt::{stats, Complex64, MatrixModel, Model, MonodromyRep, RepresentationParams};
use criterion::{criterion_group, criterion_main, Criterion};
use std::collections::BTreeMap;
use std::hint::black_box;

fn paths(c: &mut Criterion) {
    c.bench_function("polar_path_10k_steps", |b| {
        b.iter(|| simulate_path(black_box(&PathSpec::new(1, 0, 10.0, 1e-3))).unwrap())
    });
}

fn cocycle(c: &mut Criterion) {
    let h2 = Model::Matrix(MatrixModel::new("h2", MonodromyRep::build(h2_three_square()).unwrap()));
    let frame = random_frame(4, 2, 3, 0);
    c.bench_function("h2_geodesic_sigma_2k_steps", |b| {
        b.iter(|| geodesic_sigma(&h2, BasePoint::standard(), black_box(0.7), frame.clone(), 100.0, 0.05).unwrap())
    });

    let a = random_frame(8, 8, 5, 1);
    let v = KFrame::new(random_frame(8, 3, 5, 2)).unwrap();
    c.bench_function("wedge_lognorm_8x3", |b| b.iter(|| wedge_lognorm(black_box(&a), black_box(&v)).unwrap()));

    c.bench_function("monodromy_build_ew", |b| {
        b.iter(|| MonodromyRep::build(black_box(eierlegende_wollmilchsau())).unwrap())
    });
}

fn spectral(c: &mut Criterion) {
    let p = RepresentationParams::principal(1.0);
    let rhs = BTreeMap::from([(0, Complex64::new(1.0, 0.0)), (2, Complex64::new(0.0, 0.5))]);
    c.bench_function("solve_poisson_k128", |b| b.iter(|| solve_poisson(&p, black_box(1.5), &rhs, 128).unwrap()));
    c.bench_function("coercivity_k64", |b| b.iter(|| coercivity_constant(&p, black_box(1.5), 64).unwrap()));
}

fn statistics(c: &mut Criterion) {
    let xs: Vec<f64> = (0..10_000).map(|i| ((i as f64) * 0.618_033_988_7).fract() - 0.5).collect();
    c.bench_function("ks_normal_10k", |b| b.iter(|| stats::ks_normal(black_box(&xs), 0.0, 1.0 / 12.0)));
    c.bench_function("bootstrap_variance_1k_x200", |b| {
        b.iter(|| stats::bootstrap_ci(black_box(&xs[..1000]), stats::variance, 200, 0.95, 9))
    });
}

criterion_group!(benches, paths, cocycle, spectral, statistics);
criterion_main!(benches);
