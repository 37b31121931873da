//! Discretisation-invariant swap contracts.
//!
//! A swap with floating leg `sum over monitoring times of phi(z_hat)` is
//! *discretisation invariant* (DI) when its fair value does not depend on the
//! monitoring partition. Over a vector of positive martingale forwards `F`
//! (with `x = ln F` componentwise) the admissible pay-offs form a vector
//! space:
//!
//! ```text
//!   phi(z_hat) = alpha'F_hat + tr(Omega F_hat F_hat') + beta'(e^x_hat - 1) + gamma'x_hat
//! ```
//!
//! which contains the classic log variance swap as well as higher-moment and
//! straddle swaps. This crate provides
//!
//! * [`payoffs`]  - the pay-off vector space and its named constructors,
//! * [`simulate`] - monitoring partitions and exact/Euler path simulation
//!   (GBM, Merton jump diffusion, Heston),
//! * [`analytic`] - closed-form conditional moments and option prices used to
//!   value the auxiliary contracts (power log contracts, vanillas) along paths,
//! * [`replication`] - Black-76 pricing, Carr-Madan strike weights and
//!   option-chain quadrature for the power log contracts,
//! * [`swaps`]    - market states and fixed-leg (swap rate) formulas,
//! * [`hedging`]  - value increments, realised/implied decomposition and the
//!   dynamic hedge portfolios that replicate them,
//! * [`verify`]   - Monte Carlo aggregation-property checks, partition-effect
//!   estimators, PDE residuals and risk-premium studies.

pub mod analytic;
pub mod error;
pub mod hedging;
pub mod payoffs;
pub mod replication;
pub mod simulate;
pub mod swaps;
pub mod verify;

mod kahan;

pub use error::{Error, Result};
pub use hedging::{HedgeReport, HedgeSummary};
pub use payoffs::{ClassicPayoffKind, DiPayoff, Increment, SwapPayoff};
pub use replication::{OptionChain, OptionType, StrikeGrid};
pub use simulate::{Dynamics, HestonParams, JumpParams, ModelSpec, Partition, PathPanel};
pub use swaps::{FairValueParts, MarketState};
pub use verify::{ApVerdict, DeltaEstimate, PremiumReport, RateEstimate, ResidualReport};
