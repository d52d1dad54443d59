use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use parafractal::boxcount::grid_box_count;
use parafractal::fractal_sets::{cantor_cover_count, cantor_endpoints, product_points};
use parafractal::{CantorSpec, HarmonicTailSpec, Metric, PointCloud, ProductSetSpec};

fn cantor(c: &mut Criterion) {
    let spec = CantorSpec::new(0.5, 60).unwrap();
    let mut g = c.benchmark_group("cantor_cover_count");
    for delta in [1e-2, 1e-4, 1e-6] {
        g.bench_with_input(BenchmarkId::from_parameter(delta), &delta, |b, &d| {
            b.iter(|| cantor_cover_count(black_box(&spec), d).unwrap())
        });
    }
    g.finish();
}

fn grid(c: &mut Criterion) {
    let line = PointCloud::line(&cantor_endpoints(&CantorSpec::new(0.5, 14).unwrap()).unwrap()).unwrap();
    let spec = ProductSetSpec { cantor: CantorSpec::new(0.5, 10).unwrap(), tail: HarmonicTailSpec { cutoff: 500 } };
    let plane = PointCloud::plane(&product_points(&spec).unwrap()).unwrap();
    let mut g = c.benchmark_group("grid_box_count");
    for (name, cloud) in [("cantor_line", &line), ("product_plane", &plane)] {
        g.bench_function(name, |b| b.iter(|| grid_box_count(black_box(cloud), 1e-3, Metric::Euclidean).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, cantor, grid);
criterion_main!(benches);
