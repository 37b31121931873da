//! Strike-quadrature cost: building a dense chain and pricing power log
//! contracts from it.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use diswap::replication::{default_grid, power_log_price, OptionChain};
use diswap_bench::chain_4096;

fn bench_chain_build(c: &mut Criterion) {
    c.bench_function("replication/black76-chain-4096", |b| {
        let grid = default_grid(100.0, 0.2, 1.0, 4096, 10.0).unwrap();
        b.iter(|| OptionChain::from_black76(100.0, 0.2, 1.0, grid.strikes()).unwrap())
    });
}

fn bench_power_log(c: &mut Criterion) {
    let chain = chain_4096();
    let mut group = c.benchmark_group("replication/power-log");
    for n in 1u32..=4 {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| power_log_price(&chain, n).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_chain_build, bench_power_log);
criterion_main!(benches);
