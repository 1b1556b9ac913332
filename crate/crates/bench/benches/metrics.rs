use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use filterlab::metrics::{bl_distance_exact, bl_lower_random, bl_upper_min, DEFAULT_SCALES};
use filterlab::rng::stream_raw;
use filterlab_bench::cloud;

fn bl_exact(c: &mut Criterion) {
    let mut g = c.benchmark_group("bl_exact");
    g.sample_size(10);
    for n in [100, 1_000, 10_000] {
        let (a, b) = (cloud(1, n, 0.0, 1), cloud(1, n, 0.5, 2));
        g.bench_with_input(BenchmarkId::new("chain_1d", n), &n, |bench, _| {
            bench.iter(|| bl_distance_exact(&a, &b).unwrap())
        });
    }
    for n in [50, 200, 500] {
        let (a, b) = (cloud(2, n, 0.0, 1), cloud(2, n, 0.5, 2));
        g.bench_with_input(BenchmarkId::new("transport_2d", n), &n, |bench, _| {
            bench.iter(|| bl_distance_exact(&a, &b).unwrap())
        });
    }
    g.finish();
}

fn bl_bounds(c: &mut Criterion) {
    let (a, b) = (cloud(2, 5_000, 0.0, 1), cloud(2, 5_000, 0.5, 2));
    c.bench_function("bl_upper_min_2d_5000", |bench| bench.iter(|| bl_upper_min(&a, &b, &DEFAULT_SCALES).unwrap()));
    c.bench_function("bl_lower_random_2d_5000_x200", |bench| {
        let mut rng = stream_raw(3, 0);
        bench.iter(|| bl_lower_random(&a, &b, 200, &mut rng).unwrap())
    });
}

criterion_group!(benches, bl_exact, bl_bounds);
criterion_main!(benches);
