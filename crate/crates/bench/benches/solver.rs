use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dibgeo_core::baselines::{decision_boundary, gmm_em, DibClassifier, Region};
use dibgeo_core::dib::random_clustering;
use dibgeo_core::{
    beta_sweep, build_grid, dib_solve, dib_step, geometric_schedule, preset_dataset, smooth_joint, HardClustering,
    JointDistribution, PointSet, Preset, SolverOptions, SweepConfig, UpdateMode,
};

fn joint(points: &PointSet, s: f64, bins: usize) -> JointDistribution {
    smooth_joint(points, s, &build_grid(points, s, bins).unwrap()).unwrap()
}

fn smoothing(c: &mut Criterion) {
    let points = preset_dataset(Preset::ThreeEqual, 0);
    let mut group = c.benchmark_group("smooth_joint");
    for bins in [16, 32, 64] {
        group.bench_with_input(BenchmarkId::from_parameter(bins), &bins, |b, &bins| {
            b.iter(|| joint(black_box(&points), 2.0, bins))
        });
    }
    group.finish();
}

fn step(c: &mut Criterion) {
    let points = preset_dataset(Preset::ThreeEqual, 0);
    let j = joint(&points, 2.0, 32);
    let start = random_clustering(&j, 16, 0);
    let mut group = c.benchmark_group("dib_step");
    for (name, mode) in [("synchronous", UpdateMode::Synchronous), ("sequential", UpdateMode::Sequential)] {
        group.bench_function(name, |b| b.iter(|| dib_step(&j, 5.0, black_box(&start), mode).unwrap()));
    }
    group.finish();
}

fn solve(c: &mut Criterion) {
    let points = preset_dataset(Preset::ThreeEqual, 0);
    let j = joint(&points, 2.0, 32);
    c.bench_function("dib_solve/beta=5", |b| {
        b.iter(|| dib_solve(&j, 5.0, 6, black_box(1), &SolverOptions::default()).unwrap())
    });
    let mut config = SweepConfig::new(6, 0);
    config.schedule = geometric_schedule(0.1, 1e3, 10).unwrap();
    config.restarts = 2;
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    group.bench_function("three_equal/10x2", |b| b.iter(|| beta_sweep(black_box(&j), &config).unwrap()));
    group.finish();
}

fn boundary(c: &mut Criterion) {
    let points = preset_dataset(Preset::SymmetricPlusSkew, 0);
    let region = Region::around(&points, 0.0).unwrap();
    let gmm = gmm_em(&points, 2, 0, 1, 200, 1e-9).unwrap();
    let labels: Vec<usize> = (0..points.len()).map(|i| gmm.predict(points.point(i))).collect();
    let j = joint(&points, 2.0, 64);
    let clustering = HardClustering::from_assignment(&j, &labels).unwrap();
    let clf = DibClassifier::new(&j, &clustering, 1.0).unwrap();
    let mut group = c.benchmark_group("decision_boundary");
    group.sample_size(10);
    group.bench_function("gmm/100", |b| b.iter(|| decision_boundary(|x: &[f64]| gmm.predict(x), &region, 100).unwrap()));
    group.bench_function("dib/100", |b| b.iter(|| decision_boundary(|x: &[f64]| clf.classify(x), &region, 100).unwrap()));
    group.finish();
}

criterion_group!(benches, smoothing, step, solve, boundary);
criterion_main!(benches);
