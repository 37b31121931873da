//! Shared fixtures for the criterion benchmarks.
//!
//! The workloads mirror the shapes that dominate real use: daily monitoring
//! over a year, a few thousand paths, and chains wide enough for accurate
//! strike quadrature.

use diswap::replication::{default_grid, OptionChain};
use diswap::{HestonParams, JumpParams, ModelSpec, Partition};

/// One year of daily monitoring.
pub fn daily() -> Partition {
    Partition::regular(252, 1.0).expect("valid partition")
}

/// The three supported dynamics at a common level and volatility.
pub fn models() -> Vec<(&'static str, ModelSpec)> {
    vec![
        ("gbm", ModelSpec::gbm(100.0, 0.2)),
        (
            "merton",
            ModelSpec::merton(
                100.0,
                0.2,
                JumpParams { intensity: 1.0, mean_log_jump: -0.1, sd_log_jump: 0.15 },
            ),
        ),
        (
            "heston",
            ModelSpec::heston(
                100.0,
                HestonParams { kappa: 2.0, theta: 0.04, xi: 0.3, rho: -0.7, v0: 0.04 },
            ),
        ),
    ]
}

/// A dense synthetic chain for the quadrature benchmarks.
pub fn chain_4096() -> OptionChain {
    let grid = default_grid(100.0, 0.2, 1.0, 4096, 10.0).expect("valid grid");
    OptionChain::from_black76(100.0, 0.2, 1.0, grid.strikes()).expect("valid chain")
}
