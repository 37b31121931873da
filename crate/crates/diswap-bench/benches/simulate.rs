//! Path-simulation throughput across the supported dynamics.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use diswap::simulate::simulate_paths;
use diswap_bench::{daily, models};

fn bench_simulate(c: &mut Criterion) {
    let partition = daily();
    let n_paths = 1_000;
    let mut group = c.benchmark_group("simulate");
    group.throughput(Throughput::Elements((n_paths * partition.n_steps()) as u64));
    for (name, model) in models() {
        group.bench_with_input(BenchmarkId::new("daily-1k", name), &model, |b, m| {
            b.iter(|| simulate_paths(m, &partition, n_paths, 1).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_simulate);
criterion_main!(benches);
