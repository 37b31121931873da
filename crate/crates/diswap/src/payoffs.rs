//! Pay-off functions whose swaps are discretisation invariant.
//!
//! Over a `d`-vector of strictly positive martingale forwards `F` with
//! `x = ln F` componentwise, write `z_hat = (F_hat, x_hat)` for the increment
//! of `(F, x)` over one monitoring interval. The admissible pay-offs form the
//! vector space
//!
//! ```text
//!   phi(z_hat) = alpha'F_hat + tr(Omega F_hat F_hat') + beta'(e^x_hat - 1) + gamma'x_hat
//! ```
//!
//! with `alpha, beta, gamma` in R^d and `Omega` a d x d matrix, taken
//! symmetric without loss of generality (it only ever acts on the symmetric
//! matrix `F_hat F_hat'`, so the constructor symmetrises it). Every member
//! satisfies `phi(0) = 0` and the aggregation property: the expected sum of
//! `phi` over any monitoring partition equals the expectation of `phi` applied
//! to the whole-interval increment.
//!
//! Component labels name the underlying forwards: `"F"` for the primary
//! forward, `"X"`/`"X2"`/... for power log contracts (forwards on `x^n`), and
//! `"P@<strike>"`/`"C@<strike>"` for put/call forwards. Labels are only
//! interpreted when a model or option chain has to price the components;
//! [`DiPayoff::evaluate`] itself works for arbitrary labels.
//!
//! Numerical considerations: `e^x_hat - 1` is evaluated with `exp_m1` so the
//! small-increment regime (daily monitoring) does not lose precision, and the
//! binomial coefficients of the moment-swap constructor are computed in exact
//! integer arithmetic (n <= 20; larger orders are rejected rather than
//! silently rounded).

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};

/// Largest moment-swap order whose binomial coefficients we guarantee exact.
pub const MAX_MOMENT_ORDER: u32 = 20;

/// Parsed meaning of a component label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Component {
    /// The primary forward `F`.
    Forward,
    /// Forward on the n-th power of the terminal log price, `E_t[x_T^n]`.
    PowerLog(u32),
    /// Forward put struck at `k` with the swap's maturity.
    Put(f64),
    /// Forward call struck at `k` with the swap's maturity.
    Call(f64),
}

impl Component {
    /// Parse a component label; returns `None` for labels with no assigned
    /// dynamics (such pay-offs can still be evaluated pathwise).
    pub fn parse(label: &str) -> Option<Component> {
        match label {
            "F" => return Some(Component::Forward),
            "X" => return Some(Component::PowerLog(1)),
            _ => {}
        }
        if let Some(rest) = label.strip_prefix("P@") {
            return rest.parse::<f64>().ok().filter(|k| *k > 0.0).map(Component::Put);
        }
        if let Some(rest) = label.strip_prefix("C@") {
            return rest.parse::<f64>().ok().filter(|k| *k > 0.0).map(Component::Call);
        }
        if let Some(rest) = label.strip_prefix('X') {
            return rest
                .parse::<u32>()
                .ok()
                .filter(|n| *n >= 1)
                .map(Component::PowerLog);
        }
        None
    }

    /// Canonical label for this component.
    pub fn label(&self) -> String {
        match self {
            Component::Forward => "F".to_string(),
            Component::PowerLog(1) => "X".to_string(),
            Component::PowerLog(n) => format!("X{n}"),
            Component::Put(k) => format!("P@{k}"),
            Component::Call(k) => format!("C@{k}"),
        }
    }
}

/// One monitoring increment of the underlying vector: level increments
/// `F_hat` and log increments `x_hat`.
///
/// Entries of `x_hat` may be NaN when the corresponding level is not strictly
/// positive; [`DiPayoff::evaluate`] only rejects that when the pay-off
/// actually weights the log of that component.
#[derive(Debug, Clone, PartialEq)]
pub struct Increment {
    pub f_hat: DVector<f64>,
    pub x_hat: DVector<f64>,
}

impl Increment {
    /// Increment with explicitly given level and log parts.
    pub fn new(f_hat: DVector<f64>, x_hat: DVector<f64>) -> Result<Self> {
        if f_hat.len() != x_hat.len() {
            return Err(Error::DimensionMismatch {
                expected: f_hat.len(),
                got: x_hat.len(),
            });
        }
        Ok(Self { f_hat, x_hat })
    }

    /// Zero increment in dimension `d` (the additive identity: every pay-off
    /// evaluates to exactly 0 on it).
    pub fn zero(d: usize) -> Self {
        Self {
            f_hat: DVector::zeros(d),
            x_hat: DVector::zeros(d),
        }
    }

    /// Increment between two level vectors; log increments are NaN where a
    /// level is not strictly positive.
    pub fn between(prev: &[f64], curr: &[f64]) -> Result<Self> {
        if prev.len() != curr.len() {
            return Err(Error::DimensionMismatch {
                expected: prev.len(),
                got: curr.len(),
            });
        }
        let d = prev.len();
        let mut f_hat = DVector::zeros(d);
        let mut x_hat = DVector::zeros(d);
        for i in 0..d {
            f_hat[i] = curr[i] - prev[i];
            x_hat[i] = if prev[i] > 0.0 && curr[i] > 0.0 {
                (curr[i] / prev[i]).ln()
            } else {
                f64::NAN
            };
        }
        Ok(Self { f_hat, x_hat })
    }
}

/// A pay-off in the discretisation-invariant vector space.
///
/// Immutable after construction; `Omega` is stored symmetrised.
#[derive(Debug, Clone, PartialEq)]
pub struct DiPayoff {
    labels: Vec<String>,
    alpha: DVector<f64>,
    omega: DMatrix<f64>,
    beta: DVector<f64>,
    gamma: DVector<f64>,
}

impl DiPayoff {
    /// Build a pay-off from its coefficient blocks.
    ///
    /// `omega` is replaced by its symmetric part `(omega + omega')/2`, which
    /// leaves the pay-off unchanged. Labels must be unique and non-empty; all
    /// coefficients must be finite.
    pub fn new(
        labels: Vec<String>,
        alpha: DVector<f64>,
        omega: DMatrix<f64>,
        beta: DVector<f64>,
        gamma: DVector<f64>,
    ) -> Result<Self> {
        let d = labels.len();
        if d == 0 {
            return Err(Error::invalid("payoff needs at least one component"));
        }
        for v in [&alpha, &beta, &gamma] {
            if v.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: v.len() });
            }
        }
        if omega.nrows() != d || omega.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: omega.nrows().max(omega.ncols()) });
        }
        let finite = alpha.iter().chain(beta.iter()).chain(gamma.iter()).chain(omega.iter());
        if finite.clone().any(|v| !v.is_finite()) {
            return Err(Error::invalid("payoff coefficients must be finite"));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() {
                return Err(Error::invalid("empty component label"));
            }
            if labels[..i].contains(l) {
                return Err(Error::LabelMismatch(format!("duplicate component label {l:?}")));
            }
        }
        let omega_sym = (&omega + omega.transpose()) * 0.5;
        Ok(Self { labels, alpha, omega: omega_sym, beta, gamma })
    }

    /// Convenience constructor from slices (row-major `omega`).
    pub fn from_slices(
        labels: &[&str],
        alpha: &[f64],
        omega_rows: &[&[f64]],
        beta: &[f64],
        gamma: &[f64],
    ) -> Result<Self> {
        let d = labels.len();
        if omega_rows.len() != d || omega_rows.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: omega_rows.len() });
        }
        let omega = DMatrix::from_fn(d, d, |i, j| omega_rows[i][j]);
        Self::new(
            labels.iter().map(|s| s.to_string()).collect(),
            DVector::from_column_slice(alpha),
            omega,
            DVector::from_column_slice(beta),
            DVector::from_column_slice(gamma),
        )
    }

    /// Number of underlying components.
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Symmetrised quadratic coefficient matrix.
    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }

    /// Whether component `i` needs a defined log increment (it carries a
    /// `beta` or `gamma` weight).
    pub fn needs_log(&self, i: usize) -> bool {
        self.beta[i] != 0.0 || self.gamma[i] != 0.0
    }

    /// Parsed components, in label order. Errors if any label has no assigned
    /// dynamics.
    pub fn components(&self) -> Result<Vec<Component>> {
        self.labels
            .iter()
            .map(|l| {
                Component::parse(l).ok_or_else(|| {
                    Error::Unsupported(format!("component label {l:?} has no assigned dynamics"))
                })
            })
            .collect()
    }

    /// Evaluate the pay-off on one increment.
    ///
    /// Errors if `f_hat` is not finite, or if a component with a `beta`/`gamma`
    /// weight has an undefined (NaN) log increment - which is how a
    /// non-positive price level surfaces here.
    pub fn evaluate(&self, incr: &Increment) -> Result<f64> {
        if incr.f_hat.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: incr.f_hat.len() });
        }
        self.eval_parts(incr.f_hat.as_slice(), incr.x_hat.as_slice())
    }

    /// Allocation-free core of [`DiPayoff::evaluate`]; `x_hat` entries may be
    /// NaN for components without log weights.
    pub fn eval_parts(&self, f_hat: &[f64], x_hat: &[f64]) -> Result<f64> {
        let d = self.dim();
        if f_hat.len() != d || x_hat.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: f_hat.len().min(x_hat.len()) });
        }
        let mut val = 0.0;
        for i in 0..d {
            let fh = f_hat[i];
            if !fh.is_finite() {
                return Err(Error::invalid(format!(
                    "non-finite level increment for component {:?}",
                    self.labels[i]
                )));
            }
            if self.alpha[i] != 0.0 {
                val += self.alpha[i] * fh;
            }
            let (b, g) = (self.beta[i], self.gamma[i]);
            if b != 0.0 || g != 0.0 {
                let xh = x_hat[i];
                if !xh.is_finite() {
                    return Err(Error::NonPositiveLevel {
                        label: self.labels[i].clone(),
                        value: f64::NAN,
                    });
                }
                if b != 0.0 {
                    val += b * xh.exp_m1();
                }
                if g != 0.0 {
                    val += g * xh;
                }
            }
        }
        // tr(Omega F_hat F_hat') = F_hat' Omega F_hat for symmetric Omega.
        for i in 0..d {
            for j in 0..d {
                let w = self.omega[(i, j)];
                if w != 0.0 {
                    val += w * f_hat[i] * f_hat[j];
                }
            }
        }
        Ok(val)
    }
}

/// Linear combination `a*p1 + b*p2` of two pay-offs over the same components.
pub fn combine(a: f64, p1: &DiPayoff, b: f64, p2: &DiPayoff) -> Result<DiPayoff> {
    if p1.labels != p2.labels {
        return Err(Error::LabelMismatch(format!(
            "cannot combine payoffs over {:?} and {:?}",
            p1.labels, p2.labels
        )));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid("combination weights must be finite"));
    }
    DiPayoff::new(
        p1.labels.clone(),
        &p1.alpha * a + &p2.alpha * b,
        &p1.omega * a + &p2.omega * b,
        &p1.beta * a + &p2.beta * b,
        &p1.gamma * a + &p2.gamma * b,
    )
}

/// The log variance swap pay-off `2(e^x_hat - 1 - x_hat)` embedded over the
/// components `(F, X)`.
///
/// Only `F`'s increments enter the pay-off; the log contract `X` is carried as
/// a second component because the replicating portfolio trades it.
pub fn lv_payoff() -> DiPayoff {
    DiPayoff::from_slices(
        &["F", "X"],
        &[0.0, 0.0],
        &[&[0.0, 0.0], &[0.0, 0.0]],
        &[2.0, 0.0],
        &[-2.0, 0.0],
    )
    .expect("static coefficients")
}

/// Exact binomial coefficient as f64 (exact for n <= [`MAX_MOMENT_ORDER`]).
pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut num: i128 = 1;
    for i in 0..k as i128 {
        num = num * (n as i128 - i) / (i + 1);
    }
    num as f64
}

/// Fixed-leg weights `omega_1..omega_{n-1}` of the n-th moment swap:
/// `omega_i = X0^{n-1-i} * sum_{j=i+1}^{n} C(n,j) (-1)^{n-j}`.
pub fn moment_omega_weights(n: u32, x0: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid(format!("moment swap order must be >= 2, got {n}")));
    }
    if n > MAX_MOMENT_ORDER {
        return Err(Error::invalid(format!(
            "moment swap order {n} exceeds {MAX_MOMENT_ORDER}; binomial coefficients would not be exact"
        )));
    }
    if !x0.is_finite() {
        return Err(Error::invalid("X0 must be finite"));
    }
    let mut out = Vec::with_capacity((n - 1) as usize);
    for i in 1..n {
        let mut s: i128 = 0;
        for j in (i + 1)..=n {
            let sign = if (n - j) % 2 == 0 { 1 } else { -1 };
            s += sign * binomial(n, j) as i128;
        }
        out.push(x0.powi((n - 1 - i) as i32) * s as f64);
    }
    Ok(out)
}

/// The n-th moment swap pay-off over the power log contracts
/// `(X, X2, .., X{n-1})`.
///
/// `Omega` carries the weights on its first row and column:
/// `Omega_11 = omega_1`, `Omega_1j = Omega_j1 = omega_j / 2` for `j >= 2`,
/// all other entries zero, so that the anti-diagonal sums reproduce
/// `omega_{m-1}` and the fixed leg equals [`crate::swaps::moment_rate`].
pub fn moment_payoff(n: u32, x0: f64) -> Result<DiPayoff> {
    let w = moment_omega_weights(n, x0)?;
    let d = (n - 1) as usize;
    let mut omega = DMatrix::zeros(d, d);
    omega[(0, 0)] = w[0];
    for j in 1..d {
        omega[(0, j)] = w[j] * 0.5;
        omega[(j, 0)] = w[j] * 0.5;
    }
    let labels = (1..n).map(|i| Component::PowerLog(i).label()).collect();
    DiPayoff::new(
        labels,
        DVector::zeros(d),
        omega,
        DVector::zeros(d),
        DVector::zeros(d),
    )
}

/// Straddle swap pay-off over puts and calls at the given strikes.
///
/// `omega_tilde` must be lower triangular on strictly ascending strikes; the
/// pay-off couples `P@k_i` with `C@k_j` through
/// `Omega = [[0, omega_tilde/2], [omega_tilde'/2, 0]]`.
pub fn straddle_payoff(strikes: &[f64], omega_tilde: &DMatrix<f64>) -> Result<DiPayoff> {
    let d = strikes.len();
    if d == 0 {
        return Err(Error::invalid("straddle needs at least one strike"));
    }
    for w in strikes.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::invalid(format!(
                "straddle strikes must be strictly ascending, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    if strikes.iter().any(|k| !(*k > 0.0)) {
        return Err(Error::invalid("straddle strikes must be positive"));
    }
    if omega_tilde.nrows() != d || omega_tilde.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: omega_tilde.nrows() });
    }
    for i in 0..d {
        for j in (i + 1)..d {
            if omega_tilde[(i, j)] != 0.0 {
                return Err(Error::invalid(format!(
                    "omega_tilde must be lower triangular; entry ({i},{j}) = {}",
                    omega_tilde[(i, j)]
                )));
            }
        }
    }
    let mut labels = Vec::with_capacity(2 * d);
    for k in strikes {
        labels.push(Component::Put(*k).label());
    }
    for k in strikes {
        labels.push(Component::Call(*k).label());
    }
    let mut omega = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let w = omega_tilde[(i, j)] * 0.5;
            omega[(i, d + j)] = w;
            omega[(d + j, i)] = w;
        }
    }
    DiPayoff::new(
        labels,
        DVector::zeros(2 * d),
        omega,
        DVector::zeros(2 * d),
        DVector::zeros(2 * d),
    )
}

/// Classic scalar pay-offs of the variance-swap literature, as functions of a
/// single log increment (plus an implied-leg increment for `NeubergerPsi`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassicPayoffKind {
    /// `x_hat^2` - the textbook discrete variance leg; *not* discretisation
    /// invariant, which makes it the canonical counterexample.
    SquaredLogReturn,
    /// `2(e^x_hat - 1 - x_hat)` - the log variance pay-off.
    LogVariance,
    /// `2(x_hat e^x_hat - e^x_hat + 1)` - the entropy variance pay-off.
    EntropyVariance,
    /// `6(x_hat e^x_hat - 2e^x_hat + x_hat + 2)` - third-order companion of
    /// the entropy pay-off.
    Tau,
    /// Neuberger's skewness pay-off `3 v_hat (e^x_hat - 1) + tau(x_hat)`;
    /// needs the increment `v_hat` of the implied leg.
    NeubergerPsi,
}

impl ClassicPayoffKind {
    /// Canonical CLI token for this kind.
    pub fn token(&self) -> &'static str {
        match self {
            ClassicPayoffKind::SquaredLogReturn => "squared-log-return",
            ClassicPayoffKind::LogVariance => "log-variance",
            ClassicPayoffKind::EntropyVariance => "entropy-variance",
            ClassicPayoffKind::Tau => "tau",
            ClassicPayoffKind::NeubergerPsi => "neuberger-psi",
        }
    }

    pub fn parse(token: &str) -> Result<Self> {
        match token {
            "squared-log-return" => Ok(ClassicPayoffKind::SquaredLogReturn),
            "log-variance" => Ok(ClassicPayoffKind::LogVariance),
            "entropy-variance" => Ok(ClassicPayoffKind::EntropyVariance),
            "tau" => Ok(ClassicPayoffKind::Tau),
            "neuberger-psi" => Ok(ClassicPayoffKind::NeubergerPsi),
            other => Err(Error::PayoffSpec(format!(
                "unknown classic payoff {other:?}; expected one of squared-log-return, \
                 log-variance, entropy-variance, tau, neuberger-psi"
            ))),
        }
    }
}

/// Evaluate a classic pay-off at one log increment.
///
/// `v_hat` must be supplied exactly when `kind` is [`ClassicPayoffKind::NeubergerPsi`].
pub fn classic_eval(kind: ClassicPayoffKind, x_hat: f64, v_hat: Option<f64>) -> Result<f64> {
    if !x_hat.is_finite() {
        return Err(Error::invalid("x_hat must be finite"));
    }
    match (kind, v_hat) {
        (ClassicPayoffKind::SquaredLogReturn, None) => Ok(x_hat * x_hat),
        (ClassicPayoffKind::LogVariance, None) => Ok(2.0 * (x_hat.exp_m1() - x_hat)),
        (ClassicPayoffKind::EntropyVariance, None) => {
            Ok(2.0 * (x_hat * x_hat.exp() - x_hat.exp_m1()))
        }
        (ClassicPayoffKind::Tau, None) => {
            Ok(6.0 * (x_hat * x_hat.exp() - 2.0 * x_hat.exp_m1() + x_hat))
        }
        (ClassicPayoffKind::NeubergerPsi, Some(v_hat)) => {
            if !v_hat.is_finite() {
                return Err(Error::invalid("v_hat must be finite"));
            }
            let tau = 6.0 * (x_hat * x_hat.exp() - 2.0 * x_hat.exp_m1() + x_hat);
            Ok(3.0 * v_hat * x_hat.exp_m1() + tau)
        }
        (ClassicPayoffKind::NeubergerPsi, None) => Err(Error::invalid(
            "neuberger-psi needs the implied-leg increment v_hat",
        )),
        (kind, Some(_)) => Err(Error::invalid(format!(
            "v_hat is only meaningful for neuberger-psi, not {:?}",
            kind.token()
        ))),
    }
}

/// Either a vector-space pay-off or a classic scalar pay-off; the simulation
/// and verification routines accept both.
#[derive(Debug, Clone, PartialEq)]
pub enum SwapPayoff {
    Di(DiPayoff),
    Classic(ClassicPayoffKind),
}

impl SwapPayoff {
    /// Short human-readable tag used in verdicts and reports.
    pub fn label(&self) -> String {
        match self {
            SwapPayoff::Di(p) => format!("di[{}]", p.labels().join(",")),
            SwapPayoff::Classic(k) => k.token().to_string(),
        }
    }
}

impl From<DiPayoff> for SwapPayoff {
    fn from(p: DiPayoff) -> Self {
        SwapPayoff::Di(p)
    }
}

// ---------------------------------------------------------------------------
// JSON pay-off specifications
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FullSpec {
    dim: usize,
    labels: Vec<String>,
    alpha: Vec<f64>,
    omega: Vec<Vec<f64>>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MomentShorthand {
    n: u32,
    #[serde(alias = "X0")]
    x0: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StraddleShorthand {
    strikes: Vec<f64>,
    omega_tilde: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PayoffSpecJson {
    Moment { moment: MomentShorthand },
    Straddle { straddle: StraddleShorthand },
    Lv { lv: bool },
    Classic { classic: String },
    Full(FullSpec),
}

/// Parse a pay-off specification.
///
/// Accepts the full coefficient form
/// `{"dim", "labels", "alpha", "omega", "beta", "gamma"}` and the shorthands
/// `{"moment": {"n": 3, "x0": -0.02}}`,
/// `{"straddle": {"strikes": [...], "omega_tilde": [[...]]}}`,
/// `{"lv": true}` and `{"classic": "squared-log-return"}`.
pub fn parse_payoff_spec(json: &str) -> Result<SwapPayoff> {
    let spec: PayoffSpecJson =
        serde_json::from_str(json).map_err(|e| Error::PayoffSpec(e.to_string()))?;
    match spec {
        PayoffSpecJson::Moment { moment } => Ok(moment_payoff(moment.n, moment.x0)?.into()),
        PayoffSpecJson::Straddle { straddle } => {
            let d = straddle.strikes.len();
            if straddle.omega_tilde.len() != d || straddle.omega_tilde.iter().any(|r| r.len() != d)
            {
                return Err(Error::PayoffSpec(format!(
                    "straddle omega_tilde must be {d}x{d} to match the strikes"
                )));
            }
            let omega_tilde = DMatrix::from_fn(d, d, |i, j| straddle.omega_tilde[i][j]);
            Ok(straddle_payoff(&straddle.strikes, &omega_tilde)?.into())
        }
        PayoffSpecJson::Lv { lv } => {
            if !lv {
                return Err(Error::PayoffSpec("\"lv\" must be true".into()));
            }
            Ok(lv_payoff().into())
        }
        PayoffSpecJson::Classic { classic } => {
            Ok(SwapPayoff::Classic(ClassicPayoffKind::parse(&classic)?))
        }
        PayoffSpecJson::Full(full) => {
            let d = full.dim;
            if full.labels.len() != d
                || full.alpha.len() != d
                || full.beta.len() != d
                || full.gamma.len() != d
                || full.omega.len() != d
                || full.omega.iter().any(|r| r.len() != d)
            {
                return Err(Error::PayoffSpec(format!(
                    "coefficient blocks do not match dim = {d}"
                )));
            }
            let omega = DMatrix::from_fn(d, d, |i, j| full.omega[i][j]);
            Ok(DiPayoff::new(
                full.labels,
                DVector::from_vec(full.alpha),
                omega,
                DVector::from_vec(full.beta),
                DVector::from_vec(full.gamma),
            )?
            .into())
        }
    }
}

/// Serialise a pay-off into the full JSON coefficient form.
pub fn payoff_spec_json(p: &DiPayoff) -> serde_json::Value {
    let d = p.dim();
    let omega: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| p.omega()[(i, j)]).collect())
        .collect();
    serde_json::json!({
        "dim": d,
        "labels": p.labels(),
        "alpha": p.alpha().as_slice(),
        "omega": omega,
        "beta": p.beta().as_slice(),
        "gamma": p.gamma().as_slice(),
    })
}
