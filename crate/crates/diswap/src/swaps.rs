//! Fair-value swap rates.
//!
//! For a pay-off in the discretisation-invariant space, the fixed leg of the
//! swap depends only on the time-0 state of the component forwards - not on
//! the monitoring partition:
//!
//! ```text
//!   v_0 = tr(Omega [Sigma_0 - F_0 F_0']) + gamma'(X_0 - x_0)
//! ```
//!
//! where `Sigma_0 = E[F_T F_T']` and `X_0 = E[x_T]` componentwise. The rate
//! is independent of `alpha` and `beta`: those legs are martingale
//! increments. [`MarketState`] carries `(F_0, Sigma_0, X_0, x_0)` and can be
//! built analytically from a model, from an option chain via static
//! replication, or directly from a ladder of power log contract prices.
//!
//! Closed-form special cases: the n-th moment swap rate (the n-th central
//! moment of `x_T` written on power log contracts), the straddle swap rate
//! `-P_0' Omega_tilde C_0` (exact in traded quotes, no strike integration),
//! the frequency swap rate (identically zero) and calendar swap rates
//! (differences of two fair values).

use nalgebra::{DMatrix, DVector};

use crate::analytic::{ComponentPricer, TimeSlice};
use crate::error::{Error, Result};
use crate::payoffs::{binomial, Component, DiPayoff, MAX_MOMENT_ORDER};
use crate::replication::{chain_sigma_entry, power_log_price, OptionChain};
use crate::simulate::ModelSpec;

/// Joint state of the pay-off's component forwards at one valuation time:
/// levels, second moments, log-contract forwards and log levels.
///
/// Entries that a particular pay-off does not need may be NaN; [`fair_value`]
/// and the hedging identities only read what the coefficients weight, and
/// error on a NaN they actually need.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketState {
    labels: Vec<String>,
    f: DVector<f64>,
    sigma: DMatrix<f64>,
    x_fwd: DVector<f64>,
    log_f: DVector<f64>,
}

impl MarketState {
    /// Assemble a state from its raw blocks.
    ///
    /// `sigma` must be symmetric where finite; `x_fwd[i]` is `E_t[x_{i,T}]`
    /// and `log_f[i] = ln F_{i,t}` (NaN where unavailable).
    pub fn new(
        labels: Vec<String>,
        f: DVector<f64>,
        sigma: DMatrix<f64>,
        x_fwd: DVector<f64>,
        log_f: DVector<f64>,
    ) -> Result<Self> {
        let d = labels.len();
        if d == 0 {
            return Err(Error::InvalidState("state needs at least one component".into()));
        }
        for v in [&f, &x_fwd, &log_f] {
            if v.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: v.len() });
            }
        }
        if sigma.nrows() != d || sigma.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: sigma.nrows() });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("component levels must be finite".into()));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let (a, b) = (sigma[(i, j)], sigma[(j, i)]);
                if a.is_finite() != b.is_finite()
                    || (a.is_finite() && (a - b).abs() > 1e-12 * a.abs().max(1.0))
                {
                    return Err(Error::InvalidState(format!(
                        "sigma is not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self { labels, f, sigma, x_fwd, log_f })
    }

    /// Analytic state for the pay-off's components under the model's pricing
    /// measure at time 0.
    ///
    /// Second-moment entries that the model supports are all filled (so the
    /// conditional covariance can be PSD-checked); entries without a closed
    /// form are NaN unless the pay-off's `Omega` actually needs them, in
    /// which case this errors.
    pub fn from_model(payoff: &DiPayoff, model: &ModelSpec, maturity: f64) -> Result<Self> {
        let pricing = model.pricing();
        let pricer = ComponentPricer::new(&pricing, maturity)?;
        let slice = pricer.slice(0.0)?;
        let x0 = pricing.f0.ln();
        let v0 = if pricing.has_variance_state() {
            match pricing.dynamics {
                crate::simulate::Dynamics::Heston(h) => Some(h.v0),
                _ => None,
            }
        } else {
            None
        };
        let state = snapshot_state(payoff, &payoff.components()?, &slice, x0, v0, true)?;
        state.check_psd()?;
        Ok(state)
    }

    /// State built from an option chain by static replication. Component
    /// prices are read off the chain (power logs via Carr-Madan quadrature);
    /// second moments use the chain-based entries where available.
    pub fn from_chain(payoff: &DiPayoff, chain: &OptionChain) -> Result<Self> {
        let comps = payoff.components()?;
        let d = comps.len();
        let mut f = DVector::zeros(d);
        let mut x_fwd = DVector::from_element(d, f64::NAN);
        let mut log_f = DVector::from_element(d, f64::NAN);
        for (i, c) in comps.iter().enumerate() {
            f[i] = match *c {
                Component::Forward => chain.forward(),
                Component::PowerLog(n) => power_log_price(chain, n)?,
                Component::Put(k) => chain.puts()[chain.strike_index(k)?],
                Component::Call(k) => chain.calls()[chain.strike_index(k)?],
            };
            if f[i] > 0.0 {
                log_f[i] = f[i].ln();
            }
            if payoff.gamma()[i] != 0.0 {
                match *c {
                    Component::Forward => x_fwd[i] = power_log_price(chain, 1)?,
                    _ => {
                        return Err(Error::Unsupported(format!(
                            "log contract on component {:?} cannot be read from a chain",
                            payoff.labels()[i]
                        )))
                    }
                }
            }
        }
        let mut sigma = DMatrix::from_element(d, d, f64::NAN);
        for i in 0..d {
            for j in i..d {
                match chain_sigma_entry(chain, comps[i], comps[j]) {
                    Ok(v) => {
                        sigma[(i, j)] = v;
                        sigma[(j, i)] = v;
                    }
                    Err(Error::Unsupported(msg)) => {
                        if payoff.omega()[(i, j)] != 0.0 {
                            return Err(Error::Unsupported(msg));
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        let state = Self::new(payoff.labels().to_vec(), f, sigma, x_fwd, log_f)?;
        state.check_psd()?;
        Ok(state)
    }

    /// State for the components `(X, X2, .., X^d)` of a moment swap, from the
    /// power log contract prices `powers = (X^(1), .., X^(2d))`.
    ///
    /// The second-moment entry for `(X^i, X^j)` is `X^(i+j)`, so a ladder up
    /// to order `2d` is required - for an n-th moment swap, `2n - 2`.
    pub fn from_power_logs(d: usize, powers: &[f64]) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidState("need at least one component".into()));
        }
        if powers.len() != 2 * d {
            return Err(Error::InvalidState(format!(
                "components X..X^{d} need power log prices up to order {}, got {} entries",
                2 * d,
                powers.len()
            )));
        }
        if powers.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("power log prices must be finite".into()));
        }
        let labels = (1..=d).map(|i| Component::PowerLog(i as u32).label()).collect();
        let f = DVector::from_fn(d, |i, _| powers[i]);
        let sigma = DMatrix::from_fn(d, d, |i, j| powers[i + j + 1]);
        let nan = DVector::from_element(d, f64::NAN);
        let log_f = DVector::from_fn(d, |i, _| if powers[i] > 0.0 { powers[i].ln() } else { f64::NAN });
        Self::new(labels, f, sigma, nan, log_f)
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Component forward levels `F_t`.
    pub fn forwards(&self) -> &DVector<f64> {
        &self.f
    }

    /// Second moments `E_t[F_T F_T']` (NaN where unavailable).
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Log contract forwards `E_t[x_T]` per component (NaN where unavailable).
    pub fn log_forwards(&self) -> &DVector<f64> {
        &self.x_fwd
    }

    /// Current log levels `x_t = ln F_t` (NaN where the level is not
    /// positive).
    pub fn log_levels(&self) -> &DVector<f64> {
        &self.log_f
    }

    /// Verify that `Sigma - F F'` is positive semi-definite (within a
    /// scale-relative tolerance) whenever all entries are available.
    pub fn check_psd(&self) -> Result<()> {
        if self.sigma.iter().any(|v| !v.is_finite()) {
            return Ok(()); // partial state: nothing to check
        }
        let d = self.dim();
        let c = DMatrix::from_fn(d, d, |i, j| self.sigma[(i, j)] - self.f[i] * self.f[j]);
        let scale = c.norm().max(1.0);
        let eigen = c.symmetric_eigen();
        let min = eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-10 * scale {
            return Err(Error::InvalidState(format!(
                "Sigma - FF' is not positive semi-definite: min eigenvalue {min}"
            )));
        }
        Ok(())
    }

    fn check_labels(&self, payoff: &DiPayoff) -> Result<()> {
        if self.labels != payoff.labels() {
            return Err(Error::LabelMismatch(format!(
                "state components {:?} do not match payoff components {:?}",
                self.labels,
                payoff.labels()
            )));
        }
        Ok(())
    }
}

/// Build a [`MarketState`] for a pay-off's components from a time slice and
/// the path state. With `full` set, every supported second-moment entry is
/// filled; otherwise only the entries the pay-off weights (the cheap form
/// used inside per-path loops).
pub(crate) fn snapshot_state(
    payoff: &DiPayoff,
    comps: &[Component],
    slice: &TimeSlice,
    x_t: f64,
    v_t: Option<f64>,
    full: bool,
) -> Result<MarketState> {
    let d = comps.len();
    let mut f = DVector::zeros(d);
    let mut x_fwd = DVector::from_element(d, f64::NAN);
    let mut log_f = DVector::from_element(d, f64::NAN);
    for (i, c) in comps.iter().enumerate() {
        f[i] = slice.level(*c, x_t, v_t)?;
        log_f[i] = match c {
            // ln(e^{x_t}) would lose bits; the log level of the forward is x_t.
            Component::Forward => x_t,
            _ if f[i] > 0.0 => f[i].ln(),
            _ => f64::NAN,
        };
        if payoff.gamma()[i] != 0.0 {
            match c {
                Component::Forward => {
                    x_fwd[i] = slice.level(Component::PowerLog(1), x_t, v_t)?;
                }
                _ => {
                    return Err(Error::Unsupported(format!(
                        "log contract on component {:?} is not available",
                        payoff.labels()[i]
                    )))
                }
            }
        }
    }
    let mut sigma = DMatrix::from_element(d, d, f64::NAN);
    for i in 0..d {
        for j in i..d {
            let needed = payoff.omega()[(i, j)] != 0.0;
            if !needed && !full {
                continue;
            }
            match slice.sigma_entry(comps[i], comps[j], x_t) {
                Ok(v) => {
                    sigma[(i, j)] = v;
                    sigma[(j, i)] = v;
                }
                Err(Error::Unsupported(msg)) => {
                    if needed {
                        return Err(Error::Unsupported(msg));
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
    MarketState::new(payoff.labels().to_vec(), f, sigma, x_fwd, log_f)
}

/// The two ingredients of the fair value: the quadratic (`Omega`) term and
/// the log contract (`gamma`) term.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FairValueParts {
    pub quadratic_term: f64,
    pub log_term: f64,
}

impl FairValueParts {
    pub fn total(&self) -> f64 {
        self.quadratic_term + self.log_term
    }
}

/// Fair-value swap rate `v_0 = tr(Omega [Sigma - FF']) + gamma'(X - x)`,
/// split into its two terms.
///
/// The conditional covariance `Sigma - FF'` is formed entrywise before the
/// `Omega` contraction; contracting the two matrices separately loses several
/// digits when `Sigma` and `FF'` are large and nearly equal.
pub fn fair_value_parts(payoff: &DiPayoff, state: &MarketState) -> Result<FairValueParts> {
    state.check_labels(payoff)?;
    let d = payoff.dim();
    let mut quad = 0.0;
    for i in 0..d {
        for j in 0..d {
            let w = payoff.omega()[(i, j)];
            if w == 0.0 {
                continue;
            }
            let c = state.sigma[(i, j)] - state.f[i] * state.f[j];
            if !c.is_finite() {
                return Err(Error::InvalidState(format!(
                    "second moment for ({}, {}) is unavailable but the payoff needs it",
                    payoff.labels()[i],
                    payoff.labels()[j]
                )));
            }
            quad += w * c;
        }
    }
    let mut log_term = 0.0;
    for i in 0..d {
        let g = payoff.gamma()[i];
        if g == 0.0 {
            continue;
        }
        let gap = state.x_fwd[i] - state.log_f[i];
        if !gap.is_finite() {
            return Err(Error::InvalidState(format!(
                "log contract for {} is unavailable but the payoff needs it",
                payoff.labels()[i]
            )));
        }
        log_term += g * gap;
    }
    Ok(FairValueParts { quadratic_term: quad, log_term })
}

/// Fair-value swap rate of a pay-off given a market state.
pub fn fair_value(payoff: &DiPayoff, state: &MarketState) -> Result<f64> {
    Ok(fair_value_parts(payoff, state)?.total())
}

/// Fair rate of the n-th moment swap from the power log ladder
/// `x_powers = (X_0^(1), .., X_0^(n))`: the n-th central moment
/// `sum_{i=1}^{n} C(n,i)(-X_0)^{n-i} X_0^(i) + (-X_0)^n`.
pub fn moment_rate(n: u32, x_powers: &[f64]) -> Result<f64> {
    if !(2..=MAX_MOMENT_ORDER).contains(&n) {
        return Err(Error::invalid(format!(
            "moment swap order must be in 2..={MAX_MOMENT_ORDER}, got {n}"
        )));
    }
    if x_powers.len() != n as usize {
        return Err(Error::DimensionMismatch { expected: n as usize, got: x_powers.len() });
    }
    let x0 = x_powers[0];
    let mut v = (-x0).powi(n as i32);
    for i in 1..=n {
        v += binomial(n, i) * (-x0).powi((n - i) as i32) * x_powers[(i - 1) as usize];
    }
    Ok(v)
}

/// Fair rate of the straddle swap: `-P_0' Omega_tilde C_0`, exact in traded
/// quotes. `omega_tilde` must be lower triangular.
pub fn straddle_rate(p0: &[f64], c0: &[f64], omega_tilde: &DMatrix<f64>) -> Result<f64> {
    let d = p0.len();
    if c0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: c0.len() });
    }
    if omega_tilde.nrows() != d || omega_tilde.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: omega_tilde.nrows() });
    }
    let mut v = 0.0;
    for i in 0..d {
        for j in 0..d {
            let w = omega_tilde[(i, j)];
            if j > i && w != 0.0 {
                return Err(Error::invalid(format!(
                    "omega_tilde must be lower triangular; entry ({i},{j}) = {w}"
                )));
            }
            v -= w * p0[i] * c0[j];
        }
    }
    Ok(v)
}

/// Fair rate of a frequency swap (the same pay-off monitored on nested
/// partitions, floating for floating): identically zero at inception.
pub fn frequency_rate() -> f64 {
    0.0
}

/// Fair rate of a calendar swap: difference of the long- and short-maturity
/// rates of the same pay-off family.
pub fn calendar_rate(v_long: f64, v_short: f64) -> f64 {
    v_long - v_short
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoffs::{combine, lv_payoff, moment_payoff, straddle_payoff};
    use crate::replication::{default_grid, OptionChain};

    fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
        assert!(
            (got - want).abs() <= tol,
            "{what}: expected {want}, got {got} (diff {})",
            (got - want).abs()
        );
    }

    fn wide_chain(f: f64, sigma: f64, tau: f64, n: usize) -> OptionChain {
        let grid = default_grid(f, sigma, tau, n, 10.0).unwrap();
        OptionChain::from_black76(f, sigma, tau, grid.strikes()).unwrap()
    }

    #[test]
    fn alpha_and_beta_do_not_move_the_rate() {
        let d1 = DiPayoff::from_slices(
            &["F"],
            &[0.0],
            &[&[1.0]],
            &[0.0],
            &[0.0],
        )
        .unwrap();
        let state = MarketState::new(
            vec!["F".into()],
            DVector::from_column_slice(&[100.0]),
            DMatrix::from_row_slice(1, 1, &[10_100.0]),
            DVector::from_element(1, f64::NAN),
            DVector::from_column_slice(&[100.0f64.ln()]),
        )
        .unwrap();
        assert_eq!(fair_value(&d1, &state).unwrap(), 100.0);
        // Perturbing alpha and beta leaves the value bit-identical.
        let d2 = DiPayoff::from_slices(&["F"], &[3.5], &[&[1.0]], &[-1.25], &[0.0]).unwrap();
        assert_eq!(fair_value(&d2, &state).unwrap(), fair_value(&d1, &state).unwrap());
        // A pure alpha payoff prices to zero.
        let lin = DiPayoff::from_slices(&["F"], &[2.0], &[&[0.0]], &[0.0], &[0.0]).unwrap();
        assert_eq!(fair_value(&lin, &state).unwrap(), 0.0);
    }

    #[test]
    fn fair_value_is_linear_in_the_payoff() {
        let model = ModelSpec::gbm(100.0, 0.2);
        let p1 = moment_payoff(3, -0.02).unwrap();
        let p2 = DiPayoff::from_slices(
            &["X", "X2"],
            &[0.0, 0.0],
            &[&[0.4, -0.1], &[-0.1, 0.2]],
            &[0.0, 0.0],
            &[0.0, 0.0],
        )
        .unwrap();
        let state = MarketState::from_model(&p1, &model, 1.0).unwrap();
        let c = combine(2.0, &p1, -3.0, &p2).unwrap();
        let lhs = fair_value(&c, &state).unwrap();
        let rhs =
            2.0 * fair_value(&p1, &state).unwrap() - 3.0 * fair_value(&p2, &state).unwrap();
        assert_close(lhs, rhs, 1e-14 * rhs.abs().max(1.0), "linearity");
    }

    #[test]
    fn lv_rate_from_model_and_chain() {
        // sigma^2 T = 0.04.
        let payoff = lv_payoff();
        let model = ModelSpec::gbm(100.0, 0.2);
        let state = MarketState::from_model(&payoff, &model, 1.0).unwrap();
        let parts = fair_value_parts(&payoff, &state).unwrap();
        assert_eq!(parts.quadratic_term, 0.0);
        assert_close(parts.total(), 0.04, 1e-13, "LV rate from model");
        let chain = wide_chain(100.0, 0.2, 1.0, 2048);
        let state = MarketState::from_chain(&payoff, &chain).unwrap();
        assert_close(fair_value(&payoff, &state).unwrap(), 0.04, 1e-4, "LV rate from chain");
    }

    #[test]
    fn moment_rates_match_normal_oracles() {
        // Black-76 state, sigma = 0.2, T = 1: x_T ~ N(-0.02, 0.04).
        let x0 = -0.02;
        let powers = [x0, 0.0404, -0.002408, 0.00489616];
        assert_close(moment_rate(2, &powers[..2]).unwrap(), 0.04, 1e-15, "v2");
        assert_close(moment_rate(3, &powers[..3]).unwrap(), 0.0, 1e-15, "v3");
        assert_close(moment_rate(4, &powers).unwrap(), 4.8e-3, 1e-12, "v4");
        assert!(moment_rate(2, &powers).is_err());
        assert!(moment_rate(1, &powers[..1]).is_err());
    }

    #[test]
    fn moment_rate_equals_fair_value_of_moment_payoff() {
        // f0 = 1 keeps the raw log moments small, so the identity is exact to
        // rounding; at large |ln F0| both sides share the same cancellation.
        let model = ModelSpec::gbm(1.0, 0.2);
        let pricer = ComponentPricer::new(&model, 1.0).unwrap();
        let slice = pricer.slice(0.0).unwrap();
        for n in [2u32, 3, 4] {
            let powers: Vec<f64> = (1..=n)
                .map(|i| slice.level(Component::PowerLog(i), 0.0, None).unwrap())
                .collect();
            let rate = moment_rate(n, &powers).unwrap();
            let payoff = moment_payoff(n, powers[0]).unwrap();
            let state = MarketState::from_model(&payoff, &model, 1.0).unwrap();
            let fv = fair_value(&payoff, &state).unwrap();
            assert_close(fv, rate, 1e-12 * rate.abs().max(1.0), &format!("n={n}"));
        }
    }

    #[test]
    fn moment_state_from_power_log_ladder() {
        let model = ModelSpec::gbm(1.0, 0.2);
        let pricer = ComponentPricer::new(&model, 1.0).unwrap();
        let slice = pricer.slice(0.0).unwrap();
        let powers: Vec<f64> =
            (1..=4).map(|i| slice.level(Component::PowerLog(i), 0.0, None).unwrap()).collect();
        let state = MarketState::from_power_logs(2, &powers).unwrap();
        let payoff = moment_payoff(3, powers[0]).unwrap();
        let fv = fair_value(&payoff, &state).unwrap();
        let rate = moment_rate(3, &powers[..3]).unwrap();
        assert_close(fv, rate, 1e-14, "ladder state");
        // The ladder must reach order 2d.
        assert!(MarketState::from_power_logs(2, &powers[..3]).is_err());
    }

    #[test]
    fn straddle_rate_closed_form_and_from_model() {
        let omega = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert_eq!(straddle_rate(&[5.0], &[7.0], &omega).unwrap(), -35.0);
        let zero = DMatrix::zeros(2, 2);
        assert_eq!(straddle_rate(&[5.0, 1.0], &[7.0, 2.0], &zero).unwrap(), 0.0);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(straddle_rate(&[5.0, 1.0], &[7.0, 2.0], &bad).is_err());

        // ATM Black-76: P0 = C0 = 7.9656, rate = -P0 C0 ~ -63.45.
        let model = ModelSpec::gbm(100.0, 0.2);
        let payoff = straddle_payoff(&[100.0], &omega).unwrap();
        let state = MarketState::from_model(&payoff, &model, 1.0).unwrap();
        let fv = fair_value(&payoff, &state).unwrap();
        let p0 = 7.965567455405804_f64;
        assert_close(fv, -p0 * p0, 1e-8, "straddle rate vs Black-76 oracle");
        let direct = straddle_rate(&[p0], &[p0], &omega).unwrap();
        assert_close(fv, direct, 1e-8, "fair_value vs straddle_rate");
    }

    #[test]
    fn frequency_and_calendar_rates() {
        assert_eq!(frequency_rate(), 0.0);
        assert_eq!(calendar_rate(0.02, 0.02), 0.0);
        // sigma^2 T at T = 0.5 vs 0.25.
        assert_close(calendar_rate(0.02, 0.01), 0.01, 1e-15, "calendar");
    }

    #[test]
    fn psd_violation_is_rejected() {
        let labels = vec!["F".to_string()];
        let f = DVector::from_column_slice(&[100.0]);
        // E[F_T^2] < F^2 is impossible for a martingale.
        let sigma = DMatrix::from_row_slice(1, 1, &[9_000.0]);
        let state = MarketState::new(
            labels,
            f,
            sigma,
            DVector::from_element(1, f64::NAN),
            DVector::from_column_slice(&[100.0f64.ln()]),
        )
        .unwrap();
        assert!(matches!(state.check_psd(), Err(Error::InvalidState(_))));
    }

    #[test]
    fn missing_needed_entries_error() {
        let payoff = lv_payoff();
        let state = MarketState::new(
            payoff.labels().to_vec(),
            DVector::from_column_slice(&[100.0, -0.02]),
            DMatrix::from_element(2, 2, f64::NAN),
            DVector::from_element(2, f64::NAN),
            DVector::from_column_slice(&[100.0f64.ln(), f64::NAN]),
        )
        .unwrap();
        // gamma needs X for the forward; it is NaN here.
        assert!(matches!(fair_value(&payoff, &state), Err(Error::InvalidState(_))));
    }

    #[test]
    fn label_mismatch_is_rejected() {
        let payoff = lv_payoff();
        let other = moment_payoff(2, 0.0).unwrap();
        let model = ModelSpec::gbm(100.0, 0.2);
        let state = MarketState::from_model(&other, &model, 1.0).unwrap();
        assert!(matches!(fair_value(&payoff, &state), Err(Error::LabelMismatch(_))));
    }

    #[test]
    fn heston_lv_rate_uses_expected_integrated_variance() {
        use crate::simulate::HestonParams;
        let params = HestonParams { kappa: 2.0, theta: 0.04, xi: 0.3, rho: -0.7, v0: 0.09 };
        let model = ModelSpec::heston(100.0, params);
        let payoff = lv_payoff();
        let state = MarketState::from_model(&payoff, &model, 1.0).unwrap();
        let fv = fair_value(&payoff, &state).unwrap();
        // theta T + (v0 - theta)(1 - e^{-kappa T})/kappa.
        let want = 0.04 + 0.05 * (1.0 - (-2.0f64).exp()) / 2.0;
        assert_close(fv, want, 1e-13, "Heston LV rate");
    }

    #[test]
    fn chain_state_prices_straddle() {
        let chain = wide_chain(100.0, 0.2, 1.0, 512);
        // Use a quoted strike so the chain lookup succeeds.
        let k = chain.strikes()[256];
        let omega = DMatrix::from_row_slice(1, 1, &[1.0]);
        let payoff = straddle_payoff(&[k], &omega).unwrap();
        let state = MarketState::from_chain(&payoff, &chain).unwrap();
        let fv = fair_value(&payoff, &state).unwrap();
        let i = chain.strike_index(k).unwrap();
        let want = -chain.puts()[i] * chain.calls()[i];
        assert_close(fv, want, 1e-6 * want.abs(), "chain straddle rate");
    }
}
