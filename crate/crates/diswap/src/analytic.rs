//! Conditional expectations of swap components under the supported models.
//!
//! The swap's value process needs, at each monitoring time `t` with remaining
//! life `tau = T - t`:
//!
//! * component forwards, e.g. `E_t[x_T^n]` for power log contracts and
//!   undiscounted put/call prices;
//! * second-moment entries `Sigma_t(A, B) = E_t[A_T B_T]` for the pairs of
//!   components that the quadratic coefficient matrix couples.
//!
//! For GBM and Merton the log increment `x_hat = x_T - x_t` has closed-form
//! cumulants, so raw moments follow from the standard recursion
//! `m_n = sum_{k<n} C(n-1,k) kappa_{k+1} m_{n-1-k}`. Expectations weighted by
//! the terminal forward use the share measure ("tilted" law): for GBM the
//! increment becomes `N(mean + var, var)`; for Merton the Brownian drift gains
//! `sigma^2`, the jump intensity becomes `lambda e^{m_J + s_J^2/2}` and the
//! jump law `N(m_J + s_J^2, s_J^2)`.
//!
//! Option-linked entries come from lognormal partial moments
//! `E[F^p 1{lo < F < hi}]`; under Merton the conditional law given the jump
//! count is lognormal, so every such entry is a Poisson-weighted sum of the
//! same closed form. Heston admits only the forward itself and the log
//! contract `E_t[x_T] = x_t + mu tau - (theta tau + (v_t - theta)(1 - e^{-kappa tau})/kappa)/2`;
//! everything else reports `Unsupported` rather than an approximation.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::kahan::compensated_sum;
use crate::payoffs::{binomial, Component};
use crate::simulate::{time_tol, Dynamics, ModelSpec};

/// Highest raw-moment order kept in a time slice; covers second-moment
/// entries of power log contracts up to order [`crate::payoffs::MAX_MOMENT_ORDER`].
const MAX_RAW_ORDER: usize = 40;

/// Poisson mixture truncation: stop once the weight drops below this with the
/// term index past the mean, and never keep more than `MIX_CAP` terms.
const MIX_WEIGHT_FLOOR: f64 = 1e-18;
const MIX_CAP: usize = 256;

/// Standard normal distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Raw moments `m_0..m_n` of `N(mean, var)` via
/// `m_k = mean m_{k-1} + (k-1) var m_{k-2}`.
pub(crate) fn normal_raw_moments(mean: f64, var: f64, n: usize) -> Vec<f64> {
    let mut m = Vec::with_capacity(n + 1);
    m.push(1.0);
    if n >= 1 {
        m.push(mean);
    }
    for k in 2..=n {
        let v = mean * m[k - 1] + (k - 1) as f64 * var * m[k - 2];
        m.push(v);
    }
    m
}

/// Raw moments `m_0..m_n` from cumulants `kappa_1..kappa_n` (`kappas[r-1]`
/// holds `kappa_r`).
pub(crate) fn raw_moments_from_cumulants(kappas: &[f64]) -> Vec<f64> {
    let n = kappas.len();
    let mut m = vec![0.0; n + 1];
    m[0] = 1.0;
    for k in 1..=n {
        let mut s = 0.0;
        for j in 0..k {
            s += binomial((k - 1) as u32, j as u32) * kappas[j] * m[k - 1 - j];
        }
        m[k] = s;
    }
    m
}

/// Drift of the log price per unit time, including any jump compensator:
/// `a = mu - sigma^2/2` for GBM, `a = mu - sigma^2/2 - lambda kbar` for
/// Merton.
fn log_drift_rate(model: &ModelSpec) -> f64 {
    match model.dynamics {
        Dynamics::Gbm => model.drift - 0.5 * model.vol * model.vol,
        Dynamics::MertonJump(j) => {
            model.drift - 0.5 * model.vol * model.vol - j.intensity * j.kbar()
        }
        Dynamics::Heston(_) => f64::NAN,
    }
}

/// Cumulants `kappa_1..kappa_n` of the log increment over `tau` (GBM and
/// Merton only).
fn increment_cumulants(model: &ModelSpec, tau: f64, n: usize) -> Vec<f64> {
    let s2t = model.vol * model.vol * tau;
    let mut k = vec![0.0; n];
    match model.dynamics {
        Dynamics::Gbm => {
            if n >= 1 {
                k[0] = log_drift_rate(model) * tau;
            }
            if n >= 2 {
                k[1] = s2t;
            }
        }
        Dynamics::MertonJump(j) => {
            let jump_raw = normal_raw_moments(j.mean_log_jump, j.sd_log_jump * j.sd_log_jump, n);
            let lt = j.intensity * tau;
            if n >= 1 {
                k[0] = log_drift_rate(model) * tau + lt * jump_raw[1];
            }
            if n >= 2 {
                k[1] = s2t + lt * jump_raw[2];
            }
            for r in 3..=n {
                k[r - 1] = lt * jump_raw[r];
            }
        }
        Dynamics::Heston(_) => unreachable!("Heston has no closed-form increment cumulants here"),
    }
    k
}

/// Cumulants of the log increment under the share measure (expectation
/// weighted by `F_T / E_t[F_T]`).
fn tilted_increment_cumulants(model: &ModelSpec, tau: f64, n: usize) -> Vec<f64> {
    let sigma2 = model.vol * model.vol;
    let mut k = vec![0.0; n];
    match model.dynamics {
        Dynamics::Gbm => {
            if n >= 1 {
                k[0] = (log_drift_rate(model) + sigma2) * tau;
            }
            if n >= 2 {
                k[1] = sigma2 * tau;
            }
        }
        Dynamics::MertonJump(j) => {
            let tilted_mean = j.mean_log_jump + j.sd_log_jump * j.sd_log_jump;
            let tilted_raw = normal_raw_moments(tilted_mean, j.sd_log_jump * j.sd_log_jump, n);
            let lt = j.intensity * (1.0 + j.kbar()) * tau;
            if n >= 1 {
                k[0] = (log_drift_rate(model) + sigma2) * tau + lt * tilted_raw[1];
            }
            if n >= 2 {
                k[1] = sigma2 * tau + lt * tilted_raw[2];
            }
            for r in 3..=n {
                k[r - 1] = lt * tilted_raw[r];
            }
        }
        Dynamics::Heston(_) => unreachable!(),
    }
    k
}

/// `E[e^{2 x_hat}]` over `tau` (GBM and Merton).
fn second_exponential_moment(model: &ModelSpec, tau: f64) -> f64 {
    let sigma2 = model.vol * model.vol;
    match model.dynamics {
        Dynamics::Gbm => ((2.0 * log_drift_rate(model) + 2.0 * sigma2) * tau).exp(),
        Dynamics::MertonJump(j) => {
            let jump_part = (2.0 * j.mean_log_jump + 2.0 * j.sd_log_jump * j.sd_log_jump).exp_m1();
            ((2.0 * log_drift_rate(model) + 2.0 * sigma2) * tau + j.intensity * tau * jump_part)
                .exp()
        }
        Dynamics::Heston(_) => unreachable!(),
    }
}

/// Partial power moment of a lognormal variable: for `ln F ~ N(nu, s^2)`,
///
/// ```text
///   E[F^p 1{lo < F < hi}]
///     = e^{p nu + p^2 s^2 / 2} [Phi(d(hi)) - Phi(d(lo))],
///   d(b) = (ln b - nu - p s^2) / s
/// ```
///
/// with `lo = 0` and `hi = inf` handled exactly.
pub(crate) fn lognormal_partial_power(nu: f64, s: f64, p: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(s > 0.0);
    if lo >= hi {
        return 0.0;
    }
    let d = |b: f64| -> f64 {
        if b <= 0.0 {
            f64::NEG_INFINITY
        } else if b == f64::INFINITY {
            f64::INFINITY
        } else {
            (b.ln() - nu - p * s * s) / s
        }
    };
    (p * nu + 0.5 * p * p * s * s).exp() * (norm_cdf(d(hi)) - norm_cdf(d(lo)))
}

/// One lognormal branch of the conditional law of `F_T`; `nu_shift` is the
/// mean of `ln F_T - x_t`.
#[derive(Debug, Clone, Copy)]
struct MixTerm {
    w: f64,
    nu_shift: f64,
    s: f64,
}

fn build_mixture(model: &ModelSpec, tau: f64) -> Vec<MixTerm> {
    let sigma2t = model.vol * model.vol * tau;
    let a_tau = log_drift_rate(model) * tau;
    match model.dynamics {
        Dynamics::Gbm => vec![MixTerm { w: 1.0, nu_shift: a_tau, s: sigma2t.sqrt() }],
        Dynamics::MertonJump(j) => {
            let lt = j.intensity * tau;
            if lt == 0.0 {
                return vec![MixTerm { w: 1.0, nu_shift: a_tau, s: sigma2t.sqrt() }];
            }
            let mut terms = Vec::new();
            let mut w = (-lt).exp(); // Poisson weight for j = 0
            for n in 0..MIX_CAP {
                let nf = n as f64;
                if w >= MIX_WEIGHT_FLOOR || nf <= lt {
                    terms.push(MixTerm {
                        w,
                        nu_shift: a_tau + nf * j.mean_log_jump,
                        s: (sigma2t + nf * j.sd_log_jump * j.sd_log_jump).sqrt(),
                    });
                } else {
                    break;
                }
                w *= lt / (nf + 1.0);
            }
            terms
        }
        Dynamics::Heston(_) => unreachable!(),
    }
}

/// Conditional-expectation engine for one model and one swap maturity.
///
/// Construct once, then take [`TimeSlice`]s at the monitoring times; a slice
/// caches everything that does not depend on the path state, so per-path
/// evaluation is cheap.
#[derive(Debug, Clone)]
pub struct ComponentPricer {
    model: ModelSpec,
    maturity: f64,
}

impl ComponentPricer {
    /// A pricer for the model *as given* - pass `model.pricing()` when the
    /// risk-neutral value is wanted.
    pub fn new(model: &ModelSpec, maturity: f64) -> Result<Self> {
        model.validate()?;
        if !(maturity > 0.0) || !maturity.is_finite() {
            return Err(Error::invalid(format!("maturity must be > 0, got {maturity}")));
        }
        Ok(Self { model: *model, maturity })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    /// The slice at monitoring time `t` (0 <= t <= maturity). Times within
    /// tolerance of the maturity give the exact terminal slice.
    pub fn slice(&self, t: f64) -> Result<TimeSlice> {
        let tol = time_tol(self.maturity);
        if !(t >= -tol) || !(t <= self.maturity + tol) {
            return Err(Error::invalid(format!(
                "slice time {t} outside [0, {}]",
                self.maturity
            )));
        }
        let tau = (self.maturity - t).max(0.0);
        if tau <= tol {
            return Ok(TimeSlice {
                tau: 0.0,
                terminal: true,
                raw: Vec::new(),
                tilted_raw: Vec::new(),
                exp_c2: 1.0,
                mix: Vec::new(),
                heston_x: None,
            });
        }
        match self.model.dynamics {
            Dynamics::Gbm | Dynamics::MertonJump(_) => {
                let raw = raw_moments_from_cumulants(&increment_cumulants(
                    &self.model,
                    tau,
                    MAX_RAW_ORDER,
                ));
                let tilted_raw = raw_moments_from_cumulants(&tilted_increment_cumulants(
                    &self.model,
                    tau,
                    MAX_RAW_ORDER,
                ));
                Ok(TimeSlice {
                    tau,
                    terminal: false,
                    raw,
                    tilted_raw,
                    exp_c2: second_exponential_moment(&self.model, tau),
                    mix: build_mixture(&self.model, tau),
                    heston_x: None,
                })
            }
            Dynamics::Heston(h) => {
                let decay = (1.0 - (-h.kappa * tau).exp()) / h.kappa;
                let c0 = self.model.drift * tau - 0.5 * (h.theta * tau - h.theta * decay);
                let cv = -0.5 * decay;
                Ok(TimeSlice {
                    tau,
                    terminal: false,
                    raw: Vec::new(),
                    tilted_raw: Vec::new(),
                    exp_c2: f64::NAN,
                    mix: Vec::new(),
                    heston_x: Some((c0, cv)),
                })
            }
        }
    }
}

/// Everything needed to evaluate component forwards and second-moment entries
/// at one monitoring time, as functions of the path state `x_t` (and `v_t`
/// for Heston).
#[derive(Debug, Clone)]
pub struct TimeSlice {
    tau: f64,
    terminal: bool,
    /// Raw moments of the log increment to maturity.
    raw: Vec<f64>,
    /// Raw moments under the share measure.
    tilted_raw: Vec<f64>,
    /// `E[e^{2 x_hat}]`.
    exp_c2: f64,
    /// Lognormal mixture of the conditional law of `F_T` (empty for Heston
    /// and at the terminal time).
    mix: Vec<MixTerm>,
    /// Heston log-contract coefficients `(c0, cv)`.
    heston_x: Option<(f64, f64)>,
}

impl TimeSlice {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    fn heston_unsupported(what: &str) -> Error {
        Error::Unsupported(format!(
            "{what} has no closed form under Heston; only the forward and the log \
             contract are available"
        ))
    }

    /// Mixture partial power `E_t[F_T^p 1{lo < F_T < hi}]`.
    fn partial(&self, x_t: f64, p: f64, lo: f64, hi: f64) -> Result<f64> {
        if self.mix.is_empty() {
            return Err(Self::heston_unsupported("an option-linked expectation"));
        }
        Ok(compensated_sum(self.mix.iter().map(|t| {
            t.w * lognormal_partial_power(x_t + t.nu_shift, t.s, p, lo, hi)
        })))
    }

    /// `E_t[x_T^n]` via the binomial expansion around `x_t`.
    fn power_log(&self, n: u32, x_t: f64) -> Result<f64> {
        if self.terminal {
            return Ok(x_t.powi(n as i32));
        }
        if let Some((c0, cv)) = self.heston_x {
            if n == 1 {
                // Callers route through `level`, which supplies v_t.
                let _ = (c0, cv);
            }
            return Err(Self::heston_unsupported("a power log contract"));
        }
        if n as usize >= self.raw.len() {
            return Err(Error::Unsupported(format!(
                "power log contract order {n} exceeds the cached moment order {}",
                self.raw.len() - 1
            )));
        }
        let mut s = 0.0;
        for k in 0..=n {
            s += binomial(n, k) * x_t.powi((n - k) as i32) * self.raw[k as usize];
        }
        Ok(s)
    }

    /// `E_t[F_T x_T^n] / F_t` via the share measure.
    fn forward_weighted_power_log(&self, n: u32, x_t: f64) -> Result<f64> {
        if n as usize >= self.tilted_raw.len() {
            return Err(Error::Unsupported(format!(
                "power log contract order {n} exceeds the cached moment order"
            )));
        }
        let mut s = 0.0;
        for k in 0..=n {
            s += binomial(n, k) * x_t.powi((n - k) as i32) * self.tilted_raw[k as usize];
        }
        Ok(s)
    }

    /// Forward value of one component given the path state.
    ///
    /// `v_t` is required exactly when the model is Heston and the component
    /// is the log contract.
    pub fn level(&self, comp: Component, x_t: f64, v_t: Option<f64>) -> Result<f64> {
        match comp {
            Component::Forward => Ok(x_t.exp()),
            Component::PowerLog(n) => {
                if self.terminal {
                    return Ok(x_t.powi(n as i32));
                }
                if let Some((c0, cv)) = self.heston_x {
                    if n != 1 {
                        return Err(Self::heston_unsupported("a power log contract of order >= 2"));
                    }
                    let v = v_t.ok_or_else(|| {
                        Error::InvalidState(
                            "the Heston log contract needs the variance state v_t".into(),
                        )
                    })?;
                    return Ok(x_t + c0 + cv * v);
                }
                self.power_log(n, x_t)
            }
            Component::Put(k) => {
                check_strike(k)?;
                if self.terminal {
                    return Ok((k - x_t.exp()).max(0.0));
                }
                Ok(k * self.partial(x_t, 0.0, 0.0, k)? - self.partial(x_t, 1.0, 0.0, k)?)
            }
            Component::Call(k) => {
                check_strike(k)?;
                if self.terminal {
                    return Ok((x_t.exp() - k).max(0.0));
                }
                Ok(self.partial(x_t, 1.0, k, f64::INFINITY)?
                    - k * self.partial(x_t, 0.0, k, f64::INFINITY)?)
            }
        }
    }

    /// Second-moment entry `E_t[A_T B_T]` for a pair of components.
    ///
    /// Supported pairs (GBM and Merton): forward with anything, power logs
    /// with power logs, and options with options. A power log paired with an
    /// option reports `Unsupported`. At the terminal time every entry is the
    /// exact product of intrinsic values. Heston supports none.
    pub fn sigma_entry(&self, a: Component, b: Component, x_t: f64) -> Result<f64> {
        if self.terminal {
            return Ok(self.level(a, x_t, None)? * self.level(b, x_t, None)?);
        }
        if self.heston_x.is_some() {
            return Err(Self::heston_unsupported("a second-moment entry"));
        }
        // Normalise the pair order: Forward < PowerLog < Put < Call.
        let rank = |c: &Component| match c {
            Component::Forward => 0,
            Component::PowerLog(_) => 1,
            Component::Put(_) => 2,
            Component::Call(_) => 3,
        };
        let (a, b) = if rank(&a) <= rank(&b) { (a, b) } else { (b, a) };
        let f_t = x_t.exp();
        match (a, b) {
            (Component::Forward, Component::Forward) => Ok(f_t * f_t * self.exp_c2),
            (Component::Forward, Component::PowerLog(n)) => {
                Ok(f_t * self.forward_weighted_power_log(n, x_t)?)
            }
            (Component::Forward, Component::Put(k)) => {
                check_strike(k)?;
                Ok(k * self.partial(x_t, 1.0, 0.0, k)? - self.partial(x_t, 2.0, 0.0, k)?)
            }
            (Component::Forward, Component::Call(k)) => {
                check_strike(k)?;
                Ok(self.partial(x_t, 2.0, k, f64::INFINITY)?
                    - k * self.partial(x_t, 1.0, k, f64::INFINITY)?)
            }
            (Component::PowerLog(i), Component::PowerLog(j)) => self.power_log(i + j, x_t),
            (Component::PowerLog(_), _) => Err(Error::Unsupported(
                "second moments coupling a power log contract with an option have no \
                 closed form here"
                    .into(),
            )),
            (Component::Put(ki), Component::Put(kj)) => {
                check_strike(ki)?;
                check_strike(kj)?;
                let m = ki.min(kj);
                Ok(ki * kj * self.partial(x_t, 0.0, 0.0, m)?
                    - (ki + kj) * self.partial(x_t, 1.0, 0.0, m)?
                    + self.partial(x_t, 2.0, 0.0, m)?)
            }
            (Component::Put(kp), Component::Call(kc)) => {
                check_strike(kp)?;
                check_strike(kc)?;
                // (kp - F)^+ (F - kc)^+ is non-zero only on kc < F < kp.
                if kc >= kp {
                    return Ok(0.0);
                }
                Ok((kp + kc) * self.partial(x_t, 1.0, kc, kp)?
                    - self.partial(x_t, 2.0, kc, kp)?
                    - kp * kc * self.partial(x_t, 0.0, kc, kp)?)
            }
            (Component::Call(ki), Component::Call(kj)) => {
                check_strike(ki)?;
                check_strike(kj)?;
                let m = ki.max(kj);
                Ok(self.partial(x_t, 2.0, m, f64::INFINITY)?
                    - (ki + kj) * self.partial(x_t, 1.0, m, f64::INFINITY)?
                    + ki * kj * self.partial(x_t, 0.0, m, f64::INFINITY)?)
            }
            _ => unreachable!("pair order was normalised above"),
        }
    }
}

fn check_strike(k: f64) -> Result<()> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!("strike must be > 0, got {k}")));
    }
    Ok(())
}
