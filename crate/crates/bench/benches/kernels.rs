use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use nalgebra::Point3;
use ndarray::Array2;
use pasdf::geom::{chamfer_metric, PointCloud, SpatialIndex};
use pasdf::repair::{hungarian, marching_cubes, GridSpec};
use pasdf::sdf::{EncodingConfig, LossConfig, SdfModel, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    PointCloud::new((0..n).map(|_| Point3::new(rng.random(), rng.random(), rng.random())).collect())
}

fn kdtree(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pts = cloud(&mut rng, 20_000);
    let queries = cloud(&mut rng, 1000);
    c.bench_function("kdtree build 20k", |b| b.iter(|| SpatialIndex::new(black_box(pts.points()))));
    let index = SpatialIndex::new(pts.points());
    c.bench_function("kdtree 1k nearest in 20k", |b| {
        b.iter(|| queries.points().iter().map(|q| index.nearest(q).unwrap().dist2).sum::<f64>())
    });
}

fn chamfer(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (a, b2) = (cloud(&mut rng, 10_000), cloud(&mut rng, 10_000));
    c.bench_function("chamfer 10k x 10k", |b| b.iter(|| chamfer_metric(black_box(&a), black_box(&b2)).unwrap()));
}

fn mlp(c: &mut Criterion) {
    let encoding = EncodingConfig::default();
    let train = TrainConfig {
        hidden_width: 64,
        dropout: 0.0,
        ..TrainConfig::default()
    };
    let model = SdfModel::new(train.architecture(&encoding), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points: Vec<Point3<f64>> = (0..512).map(|_| Point3::new(rng.random(), rng.random(), rng.random())).collect();
    c.bench_function("mlp forward 512", |b| b.iter(|| model.predict(black_box(&points), &encoding).unwrap()));
    let x = Array2::from_shape_fn((512, encoding.dim()), |(r, col)| encoding.encode(&points[r])[col]);
    let targets: Vec<f64> = (0..512).map(|_| rng.random::<f64>() * 0.2 - 0.1).collect();
    let loss = LossConfig::default();
    c.bench_function("mlp loss and gradients 512", |b| {
        b.iter(|| model.loss_and_gradients(x.view(), &targets, &loss, None).unwrap())
    });
}

fn extraction(c: &mut Criterion) {
    let grid = GridSpec::unit(64);
    c.bench_function("marching cubes 64^3 sphere", |b| {
        b.iter(|| marching_cubes(|p| (p - Point3::new(0.5, 0.5, 0.5)).norm() - 0.3, &grid, 0.0).unwrap())
    });
}

fn assignment(c: &mut Criterion) {
    let n = 256;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    c.bench_function("hungarian 256", |b| {
        b.iter_batched(
            || (0..n * n).map(|_| rng.random::<f64>()).collect::<Vec<f64>>(),
            |cost| hungarian(&cost, n).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

criterion_group!(benches, kdtree, chamfer, mlp, extraction, assignment);
criterion_main!(benches);
