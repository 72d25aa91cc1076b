//! Ensemble throughput on one worker against the full rayon pool.
//!
//! `cargo bench -p billiard-core` compares pool sizes; add
//! `--no-default-features` to time the sequential build instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use billiard_core::ensemble::{collision_moments, EnsembleConfig};
use billiard_core::escape::run_open;
use billiard_core::{Opening, Table, TableSpec};

fn pools() -> Vec<(usize, rayon::ThreadPool)> {
    let all = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut sizes = vec![1, all];
    sizes.dedup();
    sizes
        .into_iter()
        .map(|n| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap();
            (n, pool)
        })
        .collect()
}

fn closed(c: &mut Criterion) {
    let table = Table::new(TableSpec::Polygon { m: 5, r: 1.0 }).unwrap();
    let t_max = 200.0 * table.mean_collision_time();
    let config = EnsembleConfig::with_default_grid(&table, 4_000, 1, t_max);
    let mut group = c.benchmark_group("closed_pentagon");
    group.sample_size(10);
    for (n, pool) in pools() {
        group.bench_with_input(BenchmarkId::new("workers", n), &n, |b, _| {
            b.iter(|| pool.install(|| collision_moments(&table, &config).unwrap()))
        });
    }
    group.finish();
}

fn open(c: &mut Criterion) {
    let table = Table::new(TableSpec::Circle { r: 1.0 }).unwrap();
    let opening = Opening::new(&table, 0.0, 0.05).unwrap();
    let config = EnsembleConfig::with_default_grid(&table, 4_000, 1, 2_000.0);
    let mut group = c.benchmark_group("open_circle");
    group.sample_size(10);
    for (n, pool) in pools() {
        group.bench_with_input(BenchmarkId::new("workers", n), &n, |b, _| {
            b.iter(|| pool.install(|| run_open(&table, &opening, &config).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, closed, open);
criterion_main!(benches);
