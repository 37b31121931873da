//! Static replication of power log contracts from vanilla option chains.
//!
//! A claim on `g(F_T)` decomposes over out-of-the-money forward option prices
//! `q_t(k)` (puts below the separation strike, calls above) as
//!
//! ```text
//!   E_t[g(F_T)] = g(s) + g'(s)(F_t - s) + INT_0^inf g''(k) q_t(k) dk
//! ```
//!
//! for any separation strike `s`. With `g(F) = (ln F)^n` this prices the
//! power log contract `X_t^(n)`; the strike weight is
//!
//! ```text
//!   gamma_n(k) = g''(k) = n (ln k)^{n-2} k^{-2} [n - 1 - ln k]
//! ```
//!
//! Quadrature is trapezoidal on a log-strike grid (the integrand
//! `k * gamma_n(k) * q(k)` is smooth in `ln k`), with the separation strike at
//! the chain's current forward. The buy-and-hold variant fixes the separation
//! at the inception forward so the portfolio never needs re-splitting; it is
//! exposed as a [`StaticPortfolio`] that can be revalued on later chains.
//!
//! Also here: the Black-76 formulas used to synthesise test chains, and
//! chain-based second-moment entries (forward and power log pairs via
//! Carr-Madan weights; put-call band moments via the exact piecewise-quadratic
//! decomposition, which needs only chain prices at the two strikes plus the
//! integral of `q` over the band).

use crate::analytic::norm_cdf;
use crate::error::{Error, Result};
use crate::kahan::CompensatedSum;
use crate::payoffs::Component;

/// Vanilla option side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionType {
    Put,
    Call,
}

/// Black-76 forward option price (no discounting).
pub fn black76(f: f64, k: f64, sigma: f64, tau: f64, ty: OptionType) -> Result<f64> {
    for (name, v) in [("F", f), ("k", k), ("sigma", sigma), ("tau", tau)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!("black76 needs {name} > 0, got {v}")));
        }
    }
    let sq = sigma * tau.sqrt();
    let d1 = ((f / k).ln() + 0.5 * sq * sq) / sq;
    let d2 = d1 - sq;
    Ok(match ty {
        OptionType::Call => f * norm_cdf(d1) - k * norm_cdf(d2),
        OptionType::Put => k * norm_cdf(-d2) - f * norm_cdf(-d1),
    })
}

/// Carr-Madan strike weight `gamma_n(k)` for the power log contract of order
/// `n`: the second derivative of `(ln k)^n`.
pub fn cm_weight(n: u32, k: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::invalid("cm_weight needs n >= 1"));
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!("cm_weight needs k > 0, got {k}")));
    }
    let u = k.ln();
    Ok(match n {
        1 => -1.0 / (k * k),
        _ => n as f64 * u.powi(n as i32 - 2) * (n as f64 - 1.0 - u) / (k * k),
    })
}

/// Strike weight for the cross moment `E[F_T x_T^n]`: second derivative of
/// `F (ln F)^n`.
fn cm_cross_weight(n: u32, k: f64) -> f64 {
    let u = k.ln();
    match n {
        1 => 1.0 / k,
        _ => n as f64 * u.powi(n as i32 - 2) * (n as f64 - 1.0 + u) / k,
    }
}

/// A log-uniform strike grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrikeGrid {
    pub k_min: f64,
    pub k_max: f64,
    pub n_strikes: usize,
}

impl StrikeGrid {
    pub fn new(k_min: f64, k_max: f64, n_strikes: usize) -> Result<Self> {
        if !(k_min > 0.0) || !(k_max > k_min) || !k_max.is_finite() {
            return Err(Error::invalid(format!(
                "need 0 < k_min < k_max, got [{k_min}, {k_max}]"
            )));
        }
        if n_strikes < 16 {
            return Err(Error::invalid(format!(
                "need at least 16 strikes, got {n_strikes}"
            )));
        }
        Ok(Self { k_min, k_max, n_strikes })
    }

    /// The strikes, uniformly spaced in log strike, endpoints included.
    pub fn strikes(&self) -> Vec<f64> {
        let (lo, hi) = (self.k_min.ln(), self.k_max.ln());
        let n = self.n_strikes;
        let mut ks: Vec<f64> = (0..n)
            .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
            .collect();
        ks[0] = self.k_min;
        ks[n - 1] = self.k_max;
        ks
    }
}

/// Default grid spanning `width` lognormal standard deviations either side of
/// the forward: `[F0 e^{-width sigma sqrt(T)}, F0 e^{+width sigma sqrt(T)}]`.
pub fn default_grid(
    f0: f64,
    sigma: f64,
    t: f64,
    n_strikes: usize,
    width: f64,
) -> Result<StrikeGrid> {
    for (name, v) in [("F0", f0), ("sigma", sigma), ("T", t), ("width", width)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!("default_grid needs {name} > 0, got {v}")));
        }
    }
    let half = width * sigma * t.sqrt();
    StrikeGrid::new(f0 * (-half).exp(), f0 * half.exp(), n_strikes)
}

/// Vanilla put and call forward prices on a strike ladder at one valuation
/// time.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionChain {
    forward: f64,
    expiry: f64,
    strikes: Vec<f64>,
    puts: Vec<f64>,
    calls: Vec<f64>,
}

impl OptionChain {
    pub fn new(
        forward: f64,
        expiry: f64,
        strikes: Vec<f64>,
        puts: Vec<f64>,
        calls: Vec<f64>,
    ) -> Result<Self> {
        if !(forward > 0.0) || !forward.is_finite() {
            return Err(Error::InvalidChain(format!("forward must be > 0, got {forward}")));
        }
        if !(expiry > 0.0) || !expiry.is_finite() {
            return Err(Error::InvalidChain(format!(
                "remaining expiry must be > 0, got {expiry}"
            )));
        }
        if strikes.len() < 2 {
            return Err(Error::InvalidChain("need at least two strikes".into()));
        }
        if puts.len() != strikes.len() || calls.len() != strikes.len() {
            return Err(Error::InvalidChain(format!(
                "{} strikes but {} puts / {} calls",
                strikes.len(),
                puts.len(),
                calls.len()
            )));
        }
        for w in strikes.windows(2) {
            if !(w[0] > 0.0) || w[1] <= w[0] {
                return Err(Error::InvalidChain(format!(
                    "strikes must be positive and strictly ascending, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        let tol = 1e-9 * forward.max(1.0);
        for (i, &k) in strikes.iter().enumerate() {
            let (p, c) = (puts[i], calls[i]);
            if !p.is_finite() || !c.is_finite() {
                return Err(Error::InvalidChain(format!("non-finite price at strike {k}")));
            }
            if p < (k - forward).max(0.0) - tol || c < (forward - k).max(0.0) - tol {
                return Err(Error::InvalidChain(format!(
                    "price below intrinsic bound at strike {k} (put {p}, call {c})"
                )));
            }
            if p > k + tol || c > forward + tol {
                return Err(Error::InvalidChain(format!(
                    "price above trivial bound at strike {k} (put {p}, call {c})"
                )));
            }
        }
        Ok(Self { forward, expiry, strikes, puts, calls })
    }

    /// Synthetic chain from flat-volatility Black-76 prices.
    pub fn from_black76(f: f64, sigma: f64, expiry: f64, strikes: Vec<f64>) -> Result<Self> {
        let mut puts = Vec::with_capacity(strikes.len());
        let mut calls = Vec::with_capacity(strikes.len());
        for &k in &strikes {
            puts.push(black76(f, k, sigma, expiry, OptionType::Put)?);
            calls.push(black76(f, k, sigma, expiry, OptionType::Call)?);
        }
        Self::new(f, expiry, strikes, puts, calls)
    }

    pub fn forward(&self) -> f64 {
        self.forward
    }

    pub fn expiry(&self) -> f64 {
        self.expiry
    }

    pub fn strikes(&self) -> &[f64] {
        &self.strikes
    }

    pub fn puts(&self) -> &[f64] {
        &self.puts
    }

    pub fn calls(&self) -> &[f64] {
        &self.calls
    }

    pub fn n_strikes(&self) -> usize {
        self.strikes.len()
    }

    /// Out-of-the-money price at strike index `i` with separation at the
    /// chain's forward: put for `k <= F`, call above.
    pub fn otm(&self, i: usize) -> f64 {
        self.otm_split(i, self.forward)
    }

    fn otm_split(&self, i: usize, split: f64) -> f64 {
        if self.strikes[i] <= split {
            self.puts[i]
        } else {
            self.calls[i]
        }
    }

    /// Put-call parity gap `C - P - (F - k)` at strike index `i`.
    pub fn parity_gap(&self, i: usize) -> f64 {
        self.calls[i] - self.puts[i] - (self.forward - self.strikes[i])
    }

    /// Index of a quoted strike (within a small relative tolerance).
    pub fn strike_index(&self, k: f64) -> Result<usize> {
        let tol = 1e-9 * k.abs().max(1.0);
        self.strikes
            .iter()
            .position(|&s| (s - k).abs() <= tol)
            .ok_or_else(|| Error::InvalidChain(format!("strike {k} is not quoted on the chain")))
    }

    /// Write the chain as CSV with header `strike,put,call`.
    pub fn write_csv<P: AsRef<std::path::Path>>(&self, path: P) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["strike", "put", "call"])?;
        for i in 0..self.n_strikes() {
            w.write_record([
                format!("{}", self.strikes[i]),
                format!("{}", self.puts[i]),
                format!("{}", self.calls[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a chain written by [`OptionChain::write_csv`]. The forward and
    /// remaining expiry are not part of the file and must be supplied.
    pub fn read_csv<P: AsRef<std::path::Path>>(path: P, forward: f64, expiry: f64) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        let expected = ["strike", "put", "call"];
        if headers.iter().map(str::trim).ne(expected) {
            return Err(Error::InvalidChain(format!(
                "chain CSV header must be strike,put,call, got {headers:?}"
            )));
        }
        let mut strikes = Vec::new();
        let mut puts = Vec::new();
        let mut calls = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidChain(format!("bad chain row {rec:?}")))
            };
            strikes.push(field(0)?);
            puts.push(field(1)?);
            calls.push(field(2)?);
        }
        Self::new(forward, expiry, strikes, puts, calls)
    }
}

/// Trapezoidal quadrature of `weight(k) * q(k)` over the chain's strikes in
/// log strike (`dk = k d ln k`), with OTM separation at `split`.
fn otm_quadrature<W: Fn(f64) -> f64>(chain: &OptionChain, split: f64, weight: W) -> f64 {
    let ks = &chain.strikes;
    let mut acc = CompensatedSum::new();
    let mut prev_h = weight(ks[0]) * chain.otm_split(0, split) * ks[0];
    let mut prev_u = ks[0].ln();
    for i in 1..ks.len() {
        let h = weight(ks[i]) * chain.otm_split(i, split) * ks[i];
        let u = ks[i].ln();
        acc.add(0.5 * (prev_h + h) * (u - prev_u));
        prev_h = h;
        prev_u = u;
    }
    acc.value()
}

/// Price of the power log contract `X_t^(n) = E_t[(ln F_T)^n]` from a chain,
/// with OTM separation at an arbitrary strike `split`:
///
/// ```text
///   g(split) + g'(split)(F_t - split) + INT gamma_n(k) q(k) dk,
///   g(F) = (ln F)^n
/// ```
pub fn power_log_price_split(chain: &OptionChain, n: u32, split: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::invalid("power log order must be >= 1"));
    }
    if !(split > 0.0) || !split.is_finite() {
        return Err(Error::invalid(format!("separation strike must be > 0, got {split}")));
    }
    let x_s = split.ln();
    let g = x_s.powi(n as i32);
    let g_prime = n as f64 * x_s.powi(n as i32 - 1) / split;
    let integral = otm_quadrature(chain, split, |k| cm_weight(n, k).expect("validated k"));
    Ok(g + g_prime * (chain.forward - split) + integral)
}

/// Price of the power log contract with the standard separation at the
/// chain's current forward (the linear term vanishes).
pub fn power_log_price(chain: &OptionChain, n: u32) -> Result<f64> {
    power_log_price_split(chain, n, chain.forward)
}

/// Integral of the OTM price over a strike band `[k_lo, k_hi]`; both ends
/// must be quoted strikes.
fn band_price_integral(chain: &OptionChain, lo_idx: usize, hi_idx: usize) -> f64 {
    let mut acc = CompensatedSum::new();
    for i in lo_idx..hi_idx {
        let (k0, k1) = (chain.strikes[i], chain.strikes[i + 1]);
        let (h0, h1) = (chain.otm(i) * k0, chain.otm(i + 1) * k1);
        acc.add(0.5 * (h0 + h1) * (k1 / k0).ln());
    }
    acc.value()
}

/// Second-moment entry `E_t[A_T B_T]` from an option chain.
///
/// Supported pairs: `(F, F)`, `(F, X^n)`, `(X^i, X^j)` via Carr-Madan
/// weights, and put-call pairs `(P@k_i, C@k_j)` via the band decomposition
/// (both strikes must be quoted). Other pairs report `Unsupported`.
pub fn chain_sigma_entry(chain: &OptionChain, a: Component, b: Component) -> Result<f64> {
    let rank = |c: &Component| match c {
        Component::Forward => 0,
        Component::PowerLog(_) => 1,
        Component::Put(_) => 2,
        Component::Call(_) => 3,
    };
    let (a, b) = if rank(&a) <= rank(&b) { (a, b) } else { (b, a) };
    let f = chain.forward;
    match (a, b) {
        (Component::Forward, Component::Forward) => {
            // g(F) = F^2, g'' = 2.
            Ok(f * f + otm_quadrature(chain, f, |_| 2.0))
        }
        (Component::Forward, Component::PowerLog(n)) => {
            // g(F) = F (ln F)^n anchored at the forward.
            let x = f.ln();
            Ok(f * x.powi(n as i32) + otm_quadrature(chain, f, |k| cm_cross_weight(n, k)))
        }
        (Component::PowerLog(i), Component::PowerLog(j)) => power_log_price(chain, i + j),
        (Component::Put(kp), Component::Call(kc)) => {
            // (kp - F)^+(F - kc)^+ is piecewise quadratic: curvature -2 on the
            // open band plus point masses (kp - kc) at each kink.
            if kc >= kp {
                return Ok(0.0);
            }
            let lo = chain.strike_index(kc)?;
            let hi = chain.strike_index(kp)?;
            let intrinsic = (kp - f).max(0.0) * (f - kc).max(0.0);
            Ok(intrinsic + (kp - kc) * (chain.otm(lo) + chain.otm(hi))
                - 2.0 * band_price_integral(chain, lo, hi))
        }
        (a, b) => Err(Error::Unsupported(format!(
            "second-moment entry ({},{}) cannot be built from a chain; use a model state",
            a.label(),
            b.label()
        ))),
    }
}

/// A static buy-and-hold replication: cash, a forward position and fixed
/// option holdings. Revaluing it on a later chain needs no re-splitting of
/// puts and calls because the separation strike is frozen at inception.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticPortfolio {
    /// Cash leg `g(F_ref)`.
    pub constant: f64,
    /// Units of the forward contract (entered at `f_ref`).
    pub forward_units: f64,
    /// Forward level at inception.
    pub f_ref: f64,
    pub strikes: Vec<f64>,
    /// Holdings of puts per strike (zero above the separation strike).
    pub put_weights: Vec<f64>,
    /// Holdings of calls per strike (zero at or below the separation strike).
    pub call_weights: Vec<f64>,
}

impl StaticPortfolio {
    /// Value the portfolio on a chain quoting the same strikes.
    pub fn value_on(&self, chain: &OptionChain) -> Result<f64> {
        if chain.n_strikes() != self.strikes.len() {
            return Err(Error::InvalidChain(format!(
                "portfolio holds {} strikes, chain quotes {}",
                self.strikes.len(),
                chain.n_strikes()
            )));
        }
        for (i, &k) in self.strikes.iter().enumerate() {
            if (chain.strikes[i] - k).abs() > 1e-9 * k.max(1.0) {
                return Err(Error::InvalidChain(format!(
                    "strike mismatch at index {i}: portfolio {k}, chain {}",
                    chain.strikes[i]
                )));
            }
        }
        let mut acc = CompensatedSum::new();
        acc.add(self.constant);
        acc.add(self.forward_units * (chain.forward - self.f_ref));
        for i in 0..self.strikes.len() {
            if self.put_weights[i] != 0.0 {
                acc.add(self.put_weights[i] * chain.puts[i]);
            }
            if self.call_weights[i] != 0.0 {
                acc.add(self.call_weights[i] * chain.calls[i]);
            }
        }
        Ok(acc.value())
    }
}

/// Buy-and-hold replication of the power log contract `X^(n)` from an
/// inception chain: value on a later chain equals
/// `x0^n + n x0^{n-1}(F_t - F0)/F0 + sum gamma_n weights * option prices`,
/// with the put/call separation frozen at `F0`.
pub fn buy_and_hold_portfolio(n: u32, chain0: &OptionChain) -> Result<StaticPortfolio> {
    if n < 1 {
        return Err(Error::invalid("power log order must be >= 1"));
    }
    let f0 = chain0.forward;
    let x0 = f0.ln();
    let ks = chain0.strikes();
    let m = ks.len();
    // Trapezoid node weights in log strike: half the adjacent interval widths.
    let mut put_weights = vec![0.0; m];
    let mut call_weights = vec![0.0; m];
    for i in 0..m {
        let u_prev = if i > 0 { ks[i - 1].ln() } else { ks[0].ln() };
        let u_next = if i + 1 < m { ks[i + 1].ln() } else { ks[m - 1].ln() };
        let du = 0.5 * (u_next - u_prev);
        let w = cm_weight(n, ks[i])? * ks[i] * du;
        if ks[i] <= f0 {
            put_weights[i] = w;
        } else {
            call_weights[i] = w;
        }
    }
    Ok(StaticPortfolio {
        constant: x0.powi(n as i32),
        forward_units: n as f64 * x0.powi(n as i32 - 1) / f0,
        f_ref: f0,
        strikes: ks.to_vec(),
        put_weights,
        call_weights,
    })
}
