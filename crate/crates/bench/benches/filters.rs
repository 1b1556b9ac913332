use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use filterlab::filters::{kalman_bucy_run, particle_filter_run};
use filterlab::models::{simulate_linear_gaussian, LinearGaussianModel, Prior};
use filterlab::rng::{stream, StreamId};
use filterlab::GaussianMeasure;

fn filters(c: &mut Criterion) {
    let model = LinearGaussianModel::scalar(-0.5, 1.0, 1.0, 1.0);
    let g = GaussianMeasure::scalar(1.0, 2.0).unwrap();
    let prior = Prior::Gaussian(g.clone());
    let (_, path) = simulate_linear_gaussian(&model, &prior, 1.0, 1e-3, &mut stream(0, StreamId::Signal)).unwrap();
    c.bench_function("kalman_bucy_1000_steps", |b| b.iter(|| kalman_bucy_run(&model, &g, &path).unwrap()));
    let mut grp = c.benchmark_group("particle_filter_1000_steps");
    grp.sample_size(10);
    for n in [100, 1_000, 10_000] {
        grp.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| particle_filter_run(&model, &prior, &path, n, usize::MAX, &mut stream(0, StreamId::FilterMu)).unwrap())
        });
    }
    grp.finish();
}

criterion_group!(benches, filters);
criterion_main!(benches);
