//! Value processes and replicating portfolios.
//!
//! Between consecutive monitoring times the swap's value moves by
//!
//! ```text
//!   V_hat = alpha'F_hat + tr(Omega [Sigma_hat - 2 F_{t-1} F_hat'])
//!           + beta'(e^x_hat - 1) + gamma'X_hat
//! ```
//!
//! which splits into the realised pay-off `phi(z_hat)` plus the change in the
//! remaining fair value. The same increment is replicated exactly by a
//! portfolio that is dynamic only in the component forwards,
//!
//! ```text
//!   h_i(t-1) = alpha_i + beta_i / F_{i,t-1} - 2 (Omega F_{t-1})_i ,
//! ```
//!
//! holding the second-moment contracts statically in `Omega` and the log
//! contracts statically in `gamma` (the `beta` leg rides on the forward
//! because `e^x_hat - 1 = F_hat / F_{t-1}` componentwise). [`hedge_path`] and
//! [`hedge_panel`] walk simulated paths, accumulate the value process and
//! report how far the reconstruction drifts from the direct increment - which
//! is floating-point noise, not model error, when the inputs agree.
//!
//! Closed forms for the named swaps: the n-th moment swap's holdings in the
//! power log ladder ([`moment_hedge_ratios`]) and the straddle swap's forward
//! positions in the two options ([`straddle_hedge_increment`]). A
//! [`component_panel`] materialises the joint paths of all component prices
//! so that monitoring partitions can be compared pathwise
//! ([`frequency_mtm`]).

use nalgebra::DVector;

use crate::analytic::{ComponentPricer, TimeSlice};
use crate::error::{Error, Result};
use crate::kahan::CompensatedSum;
use crate::payoffs::{Component, DiPayoff, MAX_MOMENT_ORDER};
use crate::simulate::{map_paths, Dynamics, ModelSpec, Partition, PathPanel};
use crate::swaps::{fair_value, snapshot_state, MarketState};

fn check_labels(payoff: &DiPayoff, state: &MarketState, which: &str) -> Result<()> {
    if state.labels() != payoff.labels() {
        return Err(Error::LabelMismatch(format!(
            "{which} state components {:?} do not match payoff components {:?}",
            state.labels(),
            payoff.labels()
        )));
    }
    Ok(())
}

fn needed(v: f64, what: &str, label: &str) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::InvalidState(format!("{what} for {label} is unavailable")));
    }
    Ok(v)
}

/// One-step change of the swap value between two market states.
pub fn value_increment(payoff: &DiPayoff, prev: &MarketState, curr: &MarketState) -> Result<f64> {
    check_labels(payoff, prev, "previous")?;
    check_labels(payoff, curr, "current")?;
    let d = payoff.dim();
    let mut v = 0.0;
    for i in 0..d {
        let f_hat = curr.forwards()[i] - prev.forwards()[i];
        v += payoff.alpha()[i] * f_hat;
        if payoff.beta()[i] != 0.0 {
            let x_hat = needed(
                curr.log_levels()[i] - prev.log_levels()[i],
                "log increment",
                &payoff.labels()[i],
            )?;
            v += payoff.beta()[i] * x_hat.exp_m1();
        }
        if payoff.gamma()[i] != 0.0 {
            let xf_hat = needed(
                curr.log_forwards()[i] - prev.log_forwards()[i],
                "log contract increment",
                &payoff.labels()[i],
            )?;
            v += payoff.gamma()[i] * xf_hat;
        }
        for j in 0..d {
            let w = payoff.omega()[(i, j)];
            if w == 0.0 {
                continue;
            }
            let sigma_hat = needed(
                curr.sigma()[(i, j)] - prev.sigma()[(i, j)],
                "second-moment increment",
                &payoff.labels()[i],
            )?;
            let fj_hat = curr.forwards()[j] - prev.forwards()[j];
            // tr(Omega [Sigma_hat - 2 F_{t-1} F_hat']), entry by entry.
            v += w * (sigma_hat - 2.0 * prev.forwards()[i] * fj_hat);
        }
    }
    Ok(v)
}

/// The two legs of a one-step value change: the pay-off realised over the
/// step and the change in the remaining fair value.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Decomposition {
    pub realised: f64,
    pub implied: f64,
}

impl Decomposition {
    pub fn total(&self) -> f64 {
        self.realised + self.implied
    }
}

/// Split a one-step value change into realised pay-off and implied (fair
/// value) parts; their sum reproduces [`value_increment`] up to rounding.
pub fn decompose(payoff: &DiPayoff, prev: &MarketState, curr: &MarketState) -> Result<Decomposition> {
    check_labels(payoff, prev, "previous")?;
    check_labels(payoff, curr, "current")?;
    let realised = realised_step(payoff, prev, curr)?;
    let implied = fair_value(payoff, curr)? - fair_value(payoff, prev)?;
    Ok(Decomposition { realised, implied })
}

/// `phi(z_hat)` for the step from `prev` to `curr`, using log-level
/// differences for the log legs (exact on simulated paths).
fn realised_step(payoff: &DiPayoff, prev: &MarketState, curr: &MarketState) -> Result<f64> {
    let d = payoff.dim();
    let mut f_hat = vec![0.0; d];
    let mut x_hat = vec![0.0; d];
    for i in 0..d {
        f_hat[i] = curr.forwards()[i] - prev.forwards()[i];
        x_hat[i] = if payoff.needs_log(i) {
            curr.log_levels()[i] - prev.log_levels()[i]
        } else {
            0.0
        };
    }
    payoff.eval_parts(&f_hat, &x_hat)
}

/// Forward holdings over the next step, one per component:
/// `h_i = alpha_i + beta_i / F_{i,t-1} - 2 (Omega F_{t-1})_i`.
///
/// Together with the static `Omega` weights on the second-moment contracts
/// and the static `gamma` weights on the log contracts these replicate the
/// value increment (see [`reconstruct_increment`]).
pub fn hedge_positions(payoff: &DiPayoff, prev: &MarketState) -> Result<DVector<f64>> {
    check_labels(payoff, prev, "previous")?;
    let d = payoff.dim();
    let mut h = DVector::zeros(d);
    for i in 0..d {
        let mut hi = payoff.alpha()[i];
        if payoff.beta()[i] != 0.0 {
            let f = prev.forwards()[i];
            if !(f > 0.0) {
                return Err(Error::NonPositiveLevel {
                    label: payoff.labels()[i].clone(),
                    value: f,
                });
            }
            hi += payoff.beta()[i] / f;
        }
        for j in 0..d {
            let w = payoff.omega()[(i, j)];
            if w != 0.0 {
                hi -= 2.0 * w * needed(prev.forwards()[j], "forward level", &payoff.labels()[j])?;
            }
        }
        h[i] = hi;
    }
    Ok(h)
}

/// Value increment of the replicating portfolio:
/// `h'F_hat + sum_ij Omega_ij Sigma_hat_ij + gamma'X_hat`.
pub fn reconstruct_increment(
    payoff: &DiPayoff,
    prev: &MarketState,
    curr: &MarketState,
) -> Result<f64> {
    check_labels(payoff, curr, "current")?;
    let h = hedge_positions(payoff, prev)?;
    let d = payoff.dim();
    let mut v = 0.0;
    for i in 0..d {
        v += h[i] * (curr.forwards()[i] - prev.forwards()[i]);
        if payoff.gamma()[i] != 0.0 {
            let xf_hat = needed(
                curr.log_forwards()[i] - prev.log_forwards()[i],
                "log contract increment",
                &payoff.labels()[i],
            )?;
            v += payoff.gamma()[i] * xf_hat;
        }
        for j in 0..d {
            let w = payoff.omega()[(i, j)];
            if w == 0.0 {
                continue;
            }
            let sigma_hat = needed(
                curr.sigma()[(i, j)] - prev.sigma()[(i, j)],
                "second-moment increment",
                &payoff.labels()[i],
            )?;
            v += w * sigma_hat;
        }
    }
    Ok(v)
}

/// Holdings of the n-th moment swap hedge in the power log ladder: the value
/// increment is `sum_j c_j X_hat^(j)` with `c = moment_hedge_ratios(..)`,
/// where `prev_powers = (X^(1), .., X^(n-1))` at the start of the step.
///
/// The coefficients are
///
/// ```text
///   c_n = 1,
///   c_m = omega_{m-1} - omega_m X^(1)_{t-1}            (2 <= m <= n-1),
///   c_1 = -2 omega_1 X^(1)_{t-1} - sum_{j=2}^{n-1} omega_j X^(j)_{t-1} ,
/// ```
///
/// with `omega` the anti-diagonal weights of the moment pay-off.
pub fn moment_hedge_ratios(n: u32, x0: f64, prev_powers: &[f64]) -> Result<Vec<f64>> {
    if !(2..=MAX_MOMENT_ORDER).contains(&n) {
        return Err(Error::invalid(format!(
            "moment swap order must be in 2..={MAX_MOMENT_ORDER}, got {n}"
        )));
    }
    if !x0.is_finite() {
        return Err(Error::invalid("X0 must be finite"));
    }
    let nn = n as usize;
    if prev_powers.len() != nn - 1 {
        return Err(Error::DimensionMismatch { expected: nn - 1, got: prev_powers.len() });
    }
    if prev_powers.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("previous power log prices must be finite"));
    }
    let omega = crate::payoffs::moment_omega_weights(n, x0)?;
    let x_prev = prev_powers[0];
    let mut c = vec![0.0; nn];
    c[nn - 1] = 1.0;
    for m in 2..nn {
        c[m - 1] = omega[m - 2] - omega[m - 1] * x_prev;
    }
    let mut c1 = -2.0 * omega[0] * x_prev;
    for j in 2..nn {
        c1 -= omega[j - 1] * prev_powers[j - 1];
    }
    c[0] = c1;
    Ok(c)
}

/// Value increment of the single-strike straddle swap hedge: short
/// `P_{t-1}` calls and short `C_{t-1}` puts gives
/// `-P_{t-1} C_hat - C_{t-1} P_hat`.
pub fn straddle_hedge_increment(p_prev: f64, c_prev: f64, p_hat: f64, c_hat: f64) -> f64 {
    -p_prev * c_hat - c_prev * p_hat
}

// ---------------------------------------------------------------------------
// Pathwise hedging
// ---------------------------------------------------------------------------

/// Per-time component structures shared by the path walkers.
struct SliceLadder {
    comps: Vec<Component>,
    slices: Vec<TimeSlice>,
}

fn build_ladder(payoff: &DiPayoff, model: &ModelSpec, partition: &Partition) -> Result<SliceLadder> {
    let comps = payoff.components()?;
    let pricer = ComponentPricer::new(&model.pricing(), partition.maturity())?;
    let slices = partition.times().iter().map(|&t| pricer.slice(t)).collect::<Result<Vec<_>>>()?;
    Ok(SliceLadder { comps, slices })
}

fn initial_variance(model: &ModelSpec) -> Option<f64> {
    match model.dynamics {
        Dynamics::Heston(h) => Some(h.v0),
        _ => None,
    }
}

fn state_at(
    payoff: &DiPayoff,
    ladder: &SliceLadder,
    i: usize,
    xs: &[f64],
    vs: Option<&[f64]>,
) -> Result<MarketState> {
    snapshot_state(payoff, &ladder.comps, &ladder.slices[i], xs[i], vs.map(|v| v[i]), false)
}

struct PathOutcome {
    value: Vec<f64>,
    realised: Vec<f64>,
    implied: Vec<f64>,
    step_residual: Vec<f64>,
    terminal_gap: f64,
}

fn walk_path(
    payoff: &DiPayoff,
    ladder: &SliceLadder,
    xs: &[f64],
    vs: Option<&[f64]>,
) -> Result<PathOutcome> {
    let n_times = xs.len();
    let mut value = Vec::with_capacity(n_times);
    let mut realised = Vec::with_capacity(n_times);
    let mut implied = Vec::with_capacity(n_times);
    let mut step_residual = Vec::with_capacity(n_times - 1);
    let (mut v_sum, mut r_sum, mut i_sum, mut phi_sum) = (
        CompensatedSum::new(),
        CompensatedSum::new(),
        CompensatedSum::new(),
        CompensatedSum::new(),
    );
    value.push(0.0);
    realised.push(0.0);
    implied.push(0.0);

    let mut prev = state_at(payoff, ladder, 0, xs, vs)?;
    let v0 = fair_value(payoff, &prev)?;
    let mut fair_prev = v0;
    for i in 1..n_times {
        let curr = state_at(payoff, ladder, i, xs, vs)?;
        let v_hat = value_increment(payoff, &prev, &curr)?;
        let phi = realised_step(payoff, &prev, &curr)?;
        let fair_curr = fair_value(payoff, &curr)?;
        let recon = reconstruct_increment(payoff, &prev, &curr)?;
        step_residual.push((v_hat - recon).abs());
        v_sum.add(v_hat);
        r_sum.add(phi);
        i_sum.add(fair_curr - fair_prev);
        phi_sum.add(phi);
        value.push(v_sum.value());
        realised.push(r_sum.value());
        implied.push(i_sum.value());
        prev = curr;
        fair_prev = fair_curr;
    }
    let terminal_gap = (v_sum.value() - (phi_sum.value() - v0)).abs();
    Ok(PathOutcome { value, realised, implied, step_residual, terminal_gap })
}

/// One simulated hedge path: the value process, its realised/implied split,
/// the forward holdings over each step, and the replication diagnostics.
#[derive(Debug, Clone, serde::Serialize)]
pub struct HedgeReport {
    pub times: Vec<f64>,
    /// Cumulative swap value `V_t` (zero at inception).
    pub value: Vec<f64>,
    /// Cumulative realised pay-off leg.
    pub realised: Vec<f64>,
    /// Cumulative implied (fair value) leg.
    pub implied: Vec<f64>,
    /// Forward holdings over each step (`n_steps` rows of `dim` entries).
    pub positions: Vec<Vec<f64>>,
    /// Largest one-step gap between the value increment and its
    /// reconstruction from the hedge portfolio.
    pub max_abs_residual: f64,
    /// `|V_T - (sum of phi - v_0)|` for this path.
    pub terminal_gap: f64,
}

/// Hedge a single simulated path (RNG stream 0 of `seed`).
pub fn hedge_path(
    payoff: &DiPayoff,
    model: &ModelSpec,
    partition: &Partition,
    seed: u64,
) -> Result<HedgeReport> {
    let ladder = build_ladder(payoff, model, partition)?;
    let mut out = map_paths(model, partition.times(), 1, seed, |_, xs, vs| {
        let outcome = walk_path(payoff, &ladder, xs, vs)?;
        let mut positions = Vec::with_capacity(xs.len() - 1);
        for i in 0..xs.len() - 1 {
            let prev = state_at(payoff, &ladder, i, xs, vs)?;
            positions.push(hedge_positions(payoff, &prev)?.iter().cloned().collect());
        }
        Ok::<_, Error>((outcome, positions))
    })?;
    let (outcome, positions) = out.pop().expect("one path")?;
    let max_abs_residual = outcome.step_residual.iter().cloned().fold(0.0, f64::max);
    Ok(HedgeReport {
        times: partition.times().to_vec(),
        value: outcome.value,
        realised: outcome.realised,
        implied: outcome.implied,
        positions,
        max_abs_residual,
        terminal_gap: outcome.terminal_gap,
    })
}

/// Cross-path summary of a hedging experiment.
#[derive(Debug, Clone, serde::Serialize)]
pub struct HedgeSummary {
    pub model: String,
    pub partition: String,
    pub n_paths: usize,
    pub times: Vec<f64>,
    /// Mean swap value per monitoring time.
    pub mean_value: Vec<f64>,
    /// Mean cumulative realised leg per monitoring time.
    pub mean_realised: Vec<f64>,
    /// Mean cumulative implied leg per monitoring time.
    pub mean_implied: Vec<f64>,
    /// Largest reconstruction gap of the step ending at each time (zero at
    /// inception).
    pub max_step_residual: Vec<f64>,
    /// Largest reconstruction gap across all paths and steps.
    pub max_abs_residual: f64,
    /// Largest pathwise `|V_T - (sum of phi - v_0)|`.
    pub max_terminal_gap: f64,
    /// Moments of the terminal value across paths (population weights;
    /// kurtosis is reported as excess over the normal).
    pub terminal_mean: f64,
    pub terminal_variance: f64,
    pub terminal_skewness: f64,
    pub terminal_kurtosis: f64,
}

/// Hedge a panel of simulated paths and aggregate the diagnostics.
///
/// The per-path results are reduced sequentially in path order, so the
/// summary does not depend on the rayon thread count.
pub fn hedge_panel(
    payoff: &DiPayoff,
    model: &ModelSpec,
    partition: &Partition,
    n_paths: usize,
    seed: u64,
) -> Result<HedgeSummary> {
    let ladder = build_ladder(payoff, model, partition)?;
    let outcomes = map_paths(model, partition.times(), n_paths, seed, |_, xs, vs| {
        walk_path(payoff, &ladder, xs, vs)
    })?;
    let n_times = partition.times().len();
    let mut mean_value = vec![CompensatedSum::new(); n_times];
    let mut mean_realised = vec![CompensatedSum::new(); n_times];
    let mut mean_implied = vec![CompensatedSum::new(); n_times];
    let mut max_step_residual = vec![0.0f64; n_times];
    let mut max_abs_residual = 0.0f64;
    let mut max_terminal_gap = 0.0f64;
    let mut terminal = Vec::with_capacity(n_paths);
    for outcome in outcomes {
        let outcome = outcome?;
        for i in 0..n_times {
            mean_value[i].add(outcome.value[i]);
            mean_realised[i].add(outcome.realised[i]);
            mean_implied[i].add(outcome.implied[i]);
        }
        for (i, &r) in outcome.step_residual.iter().enumerate() {
            max_step_residual[i + 1] = max_step_residual[i + 1].max(r);
            max_abs_residual = max_abs_residual.max(r);
        }
        max_terminal_gap = max_terminal_gap.max(outcome.terminal_gap);
        terminal.push(*outcome.value.last().expect("non-empty path"));
    }
    let inv = 1.0 / n_paths as f64;
    let scale = |sums: Vec<CompensatedSum>| -> Vec<f64> {
        sums.into_iter().map(|s| s.value() * inv).collect()
    };
    let mean = terminal.iter().sum::<f64>() * inv;
    let central =
        |p: i32| terminal.iter().map(|v| (v - mean).powi(p)).sum::<f64>() * inv;
    let (m2, m3, m4) = (central(2), central(3), central(4));
    let (skew, kurt) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    Ok(HedgeSummary {
        model: model.label(),
        partition: partition.label().to_string(),
        n_paths,
        times: partition.times().to_vec(),
        mean_value: scale(mean_value),
        mean_realised: scale(mean_realised),
        mean_implied: scale(mean_implied),
        max_step_residual,
        max_abs_residual,
        max_terminal_gap,
        terminal_mean: mean,
        terminal_variance: m2,
        terminal_skewness: skew,
        terminal_kurtosis: kurt,
    })
}

// ---------------------------------------------------------------------------
// Component panels and partition comparisons
// ---------------------------------------------------------------------------

/// Simulate the joint price paths of all pay-off components along a
/// partition: forwards, power log contracts and vanilla options are revalued
/// at every monitoring time on every path.
pub fn component_panel(
    payoff: &DiPayoff,
    model: &ModelSpec,
    partition: &Partition,
    n_paths: usize,
    seed: u64,
) -> Result<PathPanel> {
    let ladder = build_ladder(payoff, model, partition)?;
    // Surface unsupported component/model combinations before simulating.
    for c in &ladder.comps {
        ladder.slices[0].level(*c, model.f0.ln(), initial_variance(model))?;
    }
    let n_comp = ladder.comps.len();
    let rows = map_paths(model, partition.times(), n_paths, seed, |_, xs, vs| {
        let mut row = Vec::with_capacity(xs.len() * n_comp);
        for i in 0..xs.len() {
            for c in &ladder.comps {
                row.push(ladder.slices[i].level(*c, xs[i], vs.map(|v| v[i]))?);
            }
        }
        Ok::<_, Error>(row)
    })?;
    let mut data = Vec::with_capacity(n_paths * partition.times().len() * n_comp);
    for row in rows {
        data.extend_from_slice(&row?);
    }
    PathPanel::from_raw(
        partition.clone(),
        payoff.labels().to_vec(),
        n_paths,
        seed,
        data,
    )
}

/// Evaluate `phi` on the increment of panel levels between two time indices.
fn panel_increment(
    payoff: &DiPayoff,
    prev: &[f64],
    curr: &[f64],
    f_hat: &mut [f64],
    x_hat: &mut [f64],
) -> Result<f64> {
    for i in 0..prev.len() {
        f_hat[i] = curr[i] - prev[i];
        x_hat[i] = if !payoff.needs_log(i) {
            0.0
        } else if prev[i] > 0.0 && curr[i] > 0.0 {
            (curr[i] / prev[i]).ln()
        } else {
            f64::NAN
        };
    }
    payoff.eval_parts(f_hat, x_hat)
}

/// Mark-to-market of a frequency swap (receive `phi` monitored on `fine`,
/// pay `phi` monitored on `coarse`) at time `t` on one panel path: the
/// difference of the two running floating legs. Zero at `t = 0`, and the
/// fair value at every `t` is zero for any pay-off in the space.
pub fn frequency_mtm(
    payoff: &DiPayoff,
    panel: &PathPanel,
    path: usize,
    fine: &Partition,
    coarse: &Partition,
    t: f64,
) -> Result<f64> {
    if panel.components != payoff.labels() {
        return Err(Error::LabelMismatch(format!(
            "panel components {:?} do not match payoff components {:?}",
            panel.components,
            payoff.labels()
        )));
    }
    if path >= panel.n_paths {
        return Err(Error::invalid(format!(
            "path {path} out of range ({} in panel)",
            panel.n_paths
        )));
    }
    coarse.index_map(fine).map_err(|_| {
        Error::InvalidPartition("the coarse partition must be a subset of the fine one".into())
    })?;
    let leg = |p: &Partition| -> Result<f64> {
        let idx = p.index_map(&panel.partition)?;
        let tol = crate::simulate::time_tol(panel.partition.maturity());
        let stop = p
            .times()
            .iter()
            .position(|&u| (u - t).abs() <= tol)
            .ok_or_else(|| {
                Error::InvalidPartition(format!("t = {t} is not a monitoring time of {}", p.label()))
            })?;
        let d = payoff.dim();
        let (mut f_hat, mut x_hat) = (vec![0.0; d], vec![0.0; d]);
        let mut sum = CompensatedSum::new();
        for w in idx[..=stop].windows(2) {
            let phi = panel_increment(
                payoff,
                panel.slice(path, w[0]),
                panel.slice(path, w[1]),
                &mut f_hat,
                &mut x_hat,
            )?;
            sum.add(phi);
        }
        Ok(sum.value())
    };
    Ok(leg(fine)? - leg(coarse)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoffs::{classic_eval, lv_payoff, moment_payoff, straddle_payoff, ClassicPayoffKind};
    use crate::simulate::HestonParams;
    use nalgebra::DMatrix;

    fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
        assert!(
            (got - want).abs() <= tol,
            "{what}: expected {want}, got {got} (diff {})",
            (got - want).abs()
        );
    }

    fn gbm_states(
        payoff: &DiPayoff,
        model: &ModelSpec,
        t0: f64,
        t1: f64,
        x0: f64,
        x1: f64,
    ) -> (MarketState, MarketState) {
        let pricer = ComponentPricer::new(&model.pricing(), 1.0).unwrap();
        let comps = payoff.components().unwrap();
        let s0 = snapshot_state(payoff, &comps, &pricer.slice(t0).unwrap(), x0, None, false)
            .unwrap();
        let s1 = snapshot_state(payoff, &comps, &pricer.slice(t1).unwrap(), x1, None, false)
            .unwrap();
        (s0, s1)
    }

    #[test]
    fn lv_value_increment_is_lambda_plus_fair_change() {
        let payoff = lv_payoff();
        let model = ModelSpec::gbm(100.0, 0.2);
        let x0 = 100.0f64.ln();
        let (s0, s1) = gbm_states(&payoff, &model, 0.0, 0.5, x0, x0 + 0.1);
        let dec = decompose(&payoff, &s0, &s1).unwrap();
        let lambda = classic_eval(ClassicPayoffKind::LogVariance, 0.1, None).unwrap();
        assert_close(dec.realised, lambda, 1e-14, "realised leg is lambda(x_hat)");
        // Fair value decays linearly in remaining time for constant vol.
        assert_close(dec.implied, -0.02, 1e-13, "implied leg");
        let v_hat = value_increment(&payoff, &s0, &s1).unwrap();
        assert_close(dec.total(), v_hat, 1e-14, "decomposition identity");
    }

    #[test]
    fn decomposition_identity_for_moment_swap() {
        let model = ModelSpec::gbm(1.0, 0.25);
        let payoff = moment_payoff(4, -0.03125).unwrap();
        let (s0, s1) = gbm_states(&payoff, &model, 0.0, 0.25, 0.0, 0.12);
        let v_hat = value_increment(&payoff, &s0, &s1).unwrap();
        let dec = decompose(&payoff, &s0, &s1).unwrap();
        assert_close(dec.total(), v_hat, 1e-14, "realised + implied = value increment");
    }

    #[test]
    fn reconstruction_matches_value_increment() {
        let model = ModelSpec::gbm(100.0, 0.2);
        for (label, payoff) in [
            ("lv", lv_payoff()),
            ("m3", moment_payoff(3, 100.0f64.ln() - 0.02).unwrap()),
            ("straddle", straddle_payoff(&[100.0], &DMatrix::from_row_slice(1, 1, &[1.0])).unwrap()),
        ] {
            let x0 = 100.0f64.ln();
            let (s0, s1) = gbm_states(&payoff, &model, 0.0, 0.5, x0, x0 - 0.07);
            let v_hat = value_increment(&payoff, &s0, &s1).unwrap();
            let recon = reconstruct_increment(&payoff, &s0, &s1).unwrap();
            assert_close(recon, v_hat, 1e-10, &format!("{label} reconstruction"));
        }
    }

    #[test]
    fn lv_hedge_holds_two_over_f_forwards() {
        let payoff = lv_payoff();
        let model = ModelSpec::gbm(100.0, 0.2);
        let (s0, _) = gbm_states(&payoff, &model, 0.0, 0.5, 100.0f64.ln(), 100.0f64.ln());
        let h = hedge_positions(&payoff, &s0).unwrap();
        assert_close(h[0], 2.0 / 100.0, 1e-15, "forward holding");
        assert_eq!(h[1], 0.0, "no holding in the log contract forward");
    }

    #[test]
    fn moment_hedge_ratios_match_closed_forms() {
        let (x0, xp, xp2, xp3) = (0.3, 0.17, 0.05, 0.011);
        let c = moment_hedge_ratios(2, x0, &[xp]).unwrap();
        assert_eq!(c, vec![-2.0 * xp, 1.0]);
        let c = moment_hedge_ratios(3, x0, &[xp, xp2]).unwrap();
        assert_close(c[2], 1.0, 0.0, "c3");
        assert_close(c[1], -2.0 * x0 - xp, 1e-15, "c2");
        assert_close(c[0], 4.0 * x0 * xp - xp2, 1e-15, "c1");
        let c = moment_hedge_ratios(4, x0, &[xp, xp2, xp3]).unwrap();
        assert_close(c[3], 1.0, 0.0, "c4");
        assert_close(c[2], -3.0 * x0 - xp, 1e-15, "c3");
        assert_close(c[1], 3.0 * x0 * x0 + 3.0 * x0 * xp, 1e-15, "c2");
        assert_close(c[0], -6.0 * x0 * x0 * xp + 3.0 * x0 * xp2 - xp3, 1e-15, "c1");
        assert!(moment_hedge_ratios(1, x0, &[]).is_err());
        assert!(moment_hedge_ratios(3, x0, &[xp]).is_err());
    }

    #[test]
    fn moment_value_increment_is_ladder_combination() {
        let model = ModelSpec::gbm(1.0, 0.2);
        let pricer = ComponentPricer::new(&model, 1.0).unwrap();
        let (s_a, s_b) = (pricer.slice(0.0).unwrap(), pricer.slice(0.4).unwrap());
        let (xa, xb) = (0.0, 0.11);
        for n in [2u32, 3, 4, 5] {
            let x0 = s_a.level(Component::PowerLog(1), xa, None).unwrap();
            let payoff = moment_payoff(n, x0).unwrap();
            let comps = payoff.components().unwrap();
            let prev = snapshot_state(&payoff, &comps, &s_a, xa, None, false).unwrap();
            let curr = snapshot_state(&payoff, &comps, &s_b, xb, None, false).unwrap();
            let v_hat = value_increment(&payoff, &prev, &curr).unwrap();
            let prev_powers: Vec<f64> = (1..n)
                .map(|i| s_a.level(Component::PowerLog(i), xa, None).unwrap())
                .collect();
            let c = moment_hedge_ratios(n, x0, &prev_powers).unwrap();
            let mut combo = 0.0;
            for (j, cj) in c.iter().enumerate() {
                let order = (j + 1) as u32;
                combo += cj
                    * (s_b.level(Component::PowerLog(order), xb, None).unwrap()
                        - s_a.level(Component::PowerLog(order), xa, None).unwrap());
            }
            assert_close(v_hat, combo, 1e-13, &format!("ladder combination n={n}"));
        }
    }

    #[test]
    fn straddle_hedge_increment_example() {
        // P = 5, C = 7, P_hat = -1, C_hat = 2: -5*2 - 7*(-1) = -3.
        assert_eq!(straddle_hedge_increment(5.0, 7.0, -1.0, 2.0), -3.0);
    }

    #[test]
    fn hedge_path_replicates_exactly() {
        let payoff = lv_payoff();
        let model = ModelSpec::gbm(100.0, 0.2);
        let partition = Partition::regular(252, 1.0).unwrap();
        let report = hedge_path(&payoff, &model, &partition, 11).unwrap();
        assert_eq!(report.value[0], 0.0);
        assert_eq!(report.positions.len(), 252);
        assert!(
            report.max_abs_residual <= 1e-10,
            "per-step residual {} exceeds 1e-10",
            report.max_abs_residual
        );
        assert!(
            report.terminal_gap <= 1e-10,
            "terminal identity gap {} exceeds 1e-10",
            report.terminal_gap
        );
        // V = realised + implied cumulatively as well.
        for i in 0..report.times.len() {
            assert_close(
                report.realised[i] + report.implied[i],
                report.value[i],
                1e-11,
                "cumulative decomposition",
            );
        }
    }

    #[test]
    fn heston_lv_hedge_path_replicates() {
        let params = HestonParams { kappa: 2.0, theta: 0.04, xi: 0.3, rho: -0.7, v0: 0.09 };
        let model = ModelSpec::heston(100.0, params);
        let payoff = lv_payoff();
        let partition = Partition::regular(52, 1.0).unwrap();
        let report = hedge_path(&payoff, &model, &partition, 5).unwrap();
        assert!(report.max_abs_residual <= 1e-10, "residual {}", report.max_abs_residual);
        assert!(report.terminal_gap <= 1e-10, "terminal gap {}", report.terminal_gap);
    }

    #[test]
    fn merton_moment_hedge_path_replicates() {
        let jumps = crate::simulate::JumpParams {
            intensity: 1.0,
            mean_log_jump: -0.1,
            sd_log_jump: 0.15,
        };
        let model = ModelSpec::merton(100.0, 0.2, jumps);
        let pricer = ComponentPricer::new(&model, 1.0).unwrap();
        let x0 = pricer.slice(0.0).unwrap().level(Component::PowerLog(1), 100.0f64.ln(), None).unwrap();
        let payoff = moment_payoff(3, x0).unwrap();
        let partition = Partition::regular(52, 1.0).unwrap();
        let report = hedge_path(&payoff, &model, &partition, 3).unwrap();
        assert!(report.max_abs_residual <= 1e-10, "residual {}", report.max_abs_residual);
        assert!(report.terminal_gap <= 1e-10, "terminal gap {}", report.terminal_gap);
    }

    #[test]
    fn hedge_panel_value_is_centered_under_pricing_measure() {
        let payoff = lv_payoff();
        let model = ModelSpec::gbm(100.0, 0.2);
        let partition = Partition::regular(12, 1.0).unwrap();
        let summary = hedge_panel(&payoff, &model, &partition, 4000, 99).unwrap();
        assert_eq!(summary.n_paths, 4000);
        assert!(summary.terminal_variance > 0.0);
        let se = (summary.terminal_variance / 4000.0).sqrt();
        assert!(
            summary.terminal_mean.abs() <= 4.0 * se,
            "terminal mean {} vs SE {se}",
            summary.terminal_mean
        );
        assert!(summary.max_abs_residual <= 1e-10);
        assert!(summary.max_terminal_gap <= 1e-10);
        // Mean value stays centered at every monitoring time.
        for (t, v) in summary.times.iter().zip(&summary.mean_value) {
            assert!(v.abs() <= 6.0 * se.max(1e-12), "mean value {v} at t={t}");
        }
    }

    #[test]
    fn straddle_panel_has_intrinsic_terminal_levels() {
        let omega = DMatrix::from_row_slice(1, 1, &[1.0]);
        let payoff = straddle_payoff(&[100.0], &omega).unwrap();
        let model = ModelSpec::gbm(100.0, 0.2);
        let partition = Partition::regular(4, 1.0).unwrap();
        let panel = component_panel(&payoff, &model, &partition, 8, 21).unwrap();
        assert_eq!(panel.components, payoff.labels());
        let f_model = ModelSpec::gbm(100.0, 0.2);
        let fp = crate::simulate::simulate_paths(&f_model, &partition, 8, 21).unwrap();
        for p in 0..8 {
            let f_t = fp.value(p, 4, 0);
            let put = panel.value(p, 4, 0);
            let call = panel.value(p, 4, 1);
            assert_close(put, (100.0 - f_t).max(0.0), 1e-9, "terminal put intrinsic");
            assert_close(call, (f_t - 100.0).max(0.0), 1e-9, "terminal call intrinsic");
        }
    }

    #[test]
    fn frequency_mtm_telescopes() {
        let payoff = lv_payoff();
        let model = ModelSpec::gbm(100.0, 0.2);
        let daily = Partition::regular(36, 1.0).unwrap();
        let monthly = Partition::regular(12, 1.0).unwrap();
        let panel = component_panel(&payoff, &model, &daily, 4, 17).unwrap();
        assert_eq!(frequency_mtm(&payoff, &panel, 0, &daily, &monthly, 0.0).unwrap(), 0.0);
        let m = frequency_mtm(&payoff, &panel, 0, &daily, &monthly, 1.0).unwrap();
        assert!(m.is_finite() && m.abs() < 0.1, "mtm {m}");
        // A pure-alpha payoff telescopes identically on nested partitions.
        let lin = DiPayoff::from_slices(&["F", "X"], &[1.0, 0.0], &[&[0.0, 0.0], &[0.0, 0.0]], &[0.0, 0.0], &[0.0, 0.0])
            .unwrap();
        let lm = frequency_mtm(&lin, &panel, 2, &daily, &monthly, 1.0).unwrap();
        assert!(lm.abs() <= 1e-10, "linear mtm {lm}");
        // t must be a monitoring time of both partitions.
        assert!(frequency_mtm(&payoff, &panel, 0, &daily, &monthly, 0.513).is_err());
        // coarse must nest into fine.
        let weekly = Partition::regular(52, 1.0).unwrap();
        assert!(frequency_mtm(&payoff, &panel, 0, &daily, &weekly, 1.0).is_err());
    }
}
