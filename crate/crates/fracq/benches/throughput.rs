//! Throughput of the data-parallel hot paths. With the `parallel` feature
//! (the default) each workload runs twice: on the ambient rayon pool and
//! inside a one-thread pool as the baseline. Without the feature only the
//! sequential fallback exists.

use std::hint::black_box;

use criterion::measurement::WallTime;
use criterion::{criterion_group, criterion_main, BenchmarkGroup, Criterion, Throughput};

use fracq::dimension::box_dimension_estimate;
use fracq::ifs::{attractor_sample, builtins, IFSystem, PointCloud};
use fracq::measure::{chaos_game, EmpiricalMeasure};
use fracq::quant::distortion;

fn bench_modes(group: &mut BenchmarkGroup<'_, WallTime>, work: impl Fn() + Send + Sync) {
    #[cfg(feature = "parallel")]
    {
        group.bench_function("parallel", |b| b.iter(&work));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("single-thread pool");
        group.bench_function("one-thread", |b| b.iter(|| pool.install(&work)));
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential", |b| b.iter(&work));
}

fn cantor_with_probs() -> IFSystem {
    builtins::cantor3().with_probs(vec![0.5, 0.5]).unwrap()
}

fn bench_chaos_game(c: &mut Criterion) {
    let wifs = cantor_with_probs();
    let samples = 200_000usize;
    let mut group = c.benchmark_group("chaos-game");
    group.sample_size(10);
    group.throughput(Throughput::Elements(samples as u64));
    bench_modes(&mut group, || {
        black_box(chaos_game(&wifs, samples, 64, 1).unwrap());
    });
    group.finish();
}

fn bench_distortion(c: &mut Criterion) {
    let wifs = cantor_with_probs();
    let m: EmpiricalMeasure = chaos_game(&wifs, 50_000, 64, 1).unwrap();
    let coords: Vec<f64> = (0..64).map(|k| (k as f64 + 0.5) / 64.0).collect();
    let centers = PointCloud::from_flat(coords, 1).unwrap();
    let mut group = c.benchmark_group("distortion-64-centers");
    group.sample_size(10);
    group.throughput(Throughput::Elements(m.len() as u64));
    bench_modes(&mut group, || {
        black_box(distortion(&m, &centers, 2.0).unwrap());
    });
    group.finish();
}

fn bench_attractor(c: &mut Criterion) {
    let f = builtins::binary();
    let seed = f.default_seed_point();
    let depth = 16usize;
    let mut group = c.benchmark_group("attractor-sample");
    group.sample_size(10);
    group.throughput(Throughput::Elements(1u64 << depth));
    bench_modes(&mut group, || {
        black_box(attractor_sample(&f, depth, &seed).unwrap());
    });
    group.finish();
}

fn bench_box_counting(c: &mut Criterion) {
    let f = cantor_with_probs();
    let cloud = attractor_sample(&f, 12, &f.default_seed_point()).unwrap();
    let scales: Vec<f64> = (2..=8).map(|k| 2f64.powi(-k)).collect();
    let mut group = c.benchmark_group("box-counting");
    group.sample_size(10);
    group.throughput(Throughput::Elements(cloud.len() as u64));
    bench_modes(&mut group, || {
        black_box(box_dimension_estimate(&cloud, &scales).unwrap());
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_chaos_game,
    bench_distortion,
    bench_attractor,
    bench_box_counting
);
criterion_main!(benches);
