//! Monitoring partitions, model dynamics and Monte Carlo path panels.
//!
//! Three forward-price models are supported, all written on the log price
//! `x_t = ln F_t` with drift `mu` (set `mu = 0` for the pricing measure):
//!
//! ```text
//!   GBM      dx = (mu - sigma^2/2) dt + sigma dW
//!   Merton   dx = (mu - sigma^2/2 - lambda kbar) dt + sigma dW + dJ,
//!            J compound Poisson, jump sizes N(m_J, s_J^2),
//!            kbar = e^{m_J + s_J^2/2} - 1
//!   Heston   dx = (mu - v/2) dt + sqrt(v) dW_1
//!            dv = kappa (theta - v) dt + xi sqrt(v) dW_2,  corr(dW_1,dW_2) = rho
//! ```
//!
//! GBM and Merton are sampled exactly over each monitoring interval. Heston
//! uses a full-truncation log-Euler scheme with a fixed number of substeps per
//! monitoring interval; because the scheme is written on `x` with drift
//! `-v^+/2 dt`, the simulated forward is a martingale exactly, not just in the
//! limit.
//!
//! Reproducibility: paths are generated from a counter-based generator
//! (ChaCha8) seeded with the panel seed and one independent stream per path,
//! so results are identical for any thread count and any path-chunking.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read as IoRead, Write as IoWrite};
use std::path::Path as FsPath;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Substeps per monitoring interval for the Heston discretisation.
pub const HESTON_SUBSTEPS: usize = 8;

/// Tolerance used when matching monitoring times across partitions.
pub(crate) fn time_tol(maturity: f64) -> f64 {
    1e-12 * maturity.max(1.0)
}

// ---------------------------------------------------------------------------
// Partitions
// ---------------------------------------------------------------------------

/// A monitoring partition of `[0, T]`: strictly increasing times starting at
/// exactly 0 and ending at the maturity.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    times: Vec<f64>,
    label: String,
}

impl Partition {
    /// Build from explicit times (must start at 0, be strictly increasing and
    /// finite).
    pub fn from_times(times: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidPartition(
                "a partition needs at least two times".into(),
            ));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidPartition(format!(
                "partition must start at 0, got {}",
                times[0]
            )));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidPartition("non-finite monitoring time".into()));
        }
        for w in times.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidPartition(format!(
                    "monitoring times must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { times, label: label.into() })
    }

    /// Regular partition with `n` equal intervals over `[0, t]`.
    pub fn regular(n: usize, t: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPartition("need at least one interval".into()));
        }
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidPartition(format!("maturity must be positive, got {t}")));
        }
        let mut times: Vec<f64> = (0..=n).map(|i| i as f64 * t / n as f64).collect();
        times[0] = 0.0;
        *times.last_mut().unwrap() = t;
        Self::from_times(times, format!("regular-{n}"))
    }

    /// The trivial partition `{0, t}` - a single monitoring interval.
    pub fn trivial(t: f64) -> Result<Self> {
        Self::regular(1, t)
    }

    /// Random partition with `n` intervals: `n - 1` interior times drawn
    /// uniformly on `(0, t)`, redrawn (up to a small retry budget) until all
    /// times are separated by at least `t / (64 n)`.
    pub fn irregular(n: usize, t: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidPartition(
                "an irregular partition needs at least two intervals".into(),
            ));
        }
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidPartition(format!("maturity must be positive, got {t}")));
        }
        let min_gap = t / (64.0 * n as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..16 {
            let mut times = Vec::with_capacity(n + 1);
            times.push(0.0);
            for _ in 0..(n - 1) {
                times.push(rng.gen_range(0.0..t));
            }
            times.push(t);
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if times.windows(2).all(|w| w[1] - w[0] >= min_gap) {
                return Self::from_times(times, format!("irregular-seed{seed}"));
            }
        }
        Err(Error::InvalidPartition(format!(
            "could not draw {n} well-separated times on (0, {t}) for seed {seed}"
        )))
    }

    /// Parse a partition token: an interval count (`"12"`), one of `"daily"`
    /// (252), `"weekly"` (52), `"monthly"` (12), or `"irregular:SEED"` /
    /// `"irregular:SEED:N"` (default 48 intervals).
    pub fn parse(token: &str, t: f64) -> Result<Self> {
        match token {
            "daily" => return Self::regular(252, t),
            "weekly" => return Self::regular(52, t),
            "monthly" => return Self::regular(12, t),
            _ => {}
        }
        if let Some(rest) = token.strip_prefix("irregular:") {
            let mut parts = rest.split(':');
            let seed = parts
                .next()
                .and_then(|s| s.parse::<u64>().ok())
                .ok_or_else(|| {
                    Error::InvalidPartition(format!("bad irregular partition token {token:?}"))
                })?;
            let n = match parts.next() {
                None => 48,
                Some(s) => s.parse::<usize>().map_err(|_| {
                    Error::InvalidPartition(format!("bad irregular partition token {token:?}"))
                })?,
            };
            if parts.next().is_some() {
                return Err(Error::InvalidPartition(format!(
                    "bad irregular partition token {token:?}"
                )));
            }
            return Self::irregular(n, t, seed);
        }
        let n = token.parse::<usize>().map_err(|_| {
            Error::InvalidPartition(format!(
                "bad partition token {token:?}; expected a count, daily, weekly, monthly \
                 or irregular:SEED[:N]"
            ))
        })?;
        Self::regular(n, t)
    }

    /// Refine each interval into `factor` equal pieces. The original times are
    /// preserved bitwise, so the result is a strict superset of `self`.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidPartition("refinement factor must be >= 1".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let mut times = Vec::with_capacity(self.n_steps() * factor + 1);
        for w in self.times.windows(2) {
            let (a, b) = (w[0], w[1]);
            times.push(a);
            for k in 1..factor {
                times.push(a + (b - a) * k as f64 / factor as f64);
            }
        }
        times.push(*self.times.last().unwrap());
        Self::from_times(times, format!("{}-r{factor}", self.label))
    }

    /// Merge the monitoring times of two partitions over the same maturity.
    /// Where times coincide (within tolerance) the value from `self` is kept.
    pub fn union(&self, other: &Partition) -> Result<Self> {
        let tol = time_tol(self.maturity());
        if (self.maturity() - other.maturity()).abs() > tol {
            return Err(Error::InvalidPartition(format!(
                "cannot merge partitions with maturities {} and {}",
                self.maturity(),
                other.maturity()
            )));
        }
        let mut times = Vec::with_capacity(self.times.len() + other.times.len());
        let (mut i, mut j) = (0, 0);
        while i < self.times.len() || j < other.times.len() {
            match (self.times.get(i), other.times.get(j)) {
                (Some(&a), Some(&b)) => {
                    if (a - b).abs() <= tol {
                        times.push(a);
                        i += 1;
                        j += 1;
                    } else if a < b {
                        times.push(a);
                        i += 1;
                    } else {
                        times.push(b);
                        j += 1;
                    }
                }
                (Some(&a), None) => {
                    times.push(a);
                    i += 1;
                }
                (None, Some(&b)) => {
                    times.push(b);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        Self::from_times(times, format!("union({},{})", self.label, other.label))
    }

    /// For each time of `self`, the index of the matching time in `within`
    /// (within tolerance). Errors if `self` is not a subset of `within`.
    pub fn index_map(&self, within: &Partition) -> Result<Vec<usize>> {
        let tol = time_tol(self.maturity());
        let mut out = Vec::with_capacity(self.times.len());
        let mut j = 0;
        for &t in &self.times {
            while j < within.times.len() && within.times[j] < t - tol {
                j += 1;
            }
            match within.times.get(j) {
                Some(&u) if (u - t).abs() <= tol => out.push(j),
                _ => {
                    return Err(Error::InvalidPartition(format!(
                        "partition {:?} is not a subset of {:?}: time {t} missing",
                        self.label, within.label
                    )))
                }
            }
        }
        Ok(out)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of monitoring intervals (one less than the number of times).
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn maturity(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

/// Compound Poisson jump parameters for the Merton model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpParams {
    /// Jump arrival intensity `lambda` (per year).
    pub intensity: f64,
    /// Mean `m_J` of the normal log jump size.
    pub mean_log_jump: f64,
    /// Standard deviation `s_J` of the log jump size.
    pub sd_log_jump: f64,
}

impl JumpParams {
    /// Mean relative jump size `kbar = e^{m_J + s_J^2/2} - 1`; the drift
    /// compensator is `-lambda * kbar`.
    pub fn kbar(&self) -> f64 {
        (self.mean_log_jump + 0.5 * self.sd_log_jump * self.sd_log_jump).exp_m1()
    }

    fn validate(&self) -> Result<()> {
        if !(self.intensity >= 0.0) || !self.intensity.is_finite() {
            return Err(Error::invalid(format!(
                "jump intensity must be >= 0, got {}",
                self.intensity
            )));
        }
        if !self.mean_log_jump.is_finite() {
            return Err(Error::invalid("mean log jump must be finite"));
        }
        if !(self.sd_log_jump >= 0.0) || !self.sd_log_jump.is_finite() {
            return Err(Error::invalid(format!(
                "jump size standard deviation must be >= 0, got {}",
                self.sd_log_jump
            )));
        }
        Ok(())
    }
}

/// Square-root stochastic variance parameters for the Heston model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams {
    /// Mean-reversion speed `kappa`.
    pub kappa: f64,
    /// Long-run variance `theta`.
    pub theta: f64,
    /// Volatility of variance `xi`.
    pub xi: f64,
    /// Correlation `rho` between the price and variance drivers.
    pub rho: f64,
    /// Initial variance `v_0`.
    pub v0: f64,
}

impl HestonParams {
    fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::invalid(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if !(self.theta >= 0.0) || !self.theta.is_finite() {
            return Err(Error::invalid(format!("theta must be >= 0, got {}", self.theta)));
        }
        if !(self.xi >= 0.0) || !self.xi.is_finite() {
            return Err(Error::invalid(format!("xi must be >= 0, got {}", self.xi)));
        }
        if !(self.rho >= -1.0 && self.rho <= 1.0) {
            return Err(Error::invalid(format!("rho must lie in [-1, 1], got {}", self.rho)));
        }
        if !(self.v0 >= 0.0) || !self.v0.is_finite() {
            return Err(Error::invalid(format!("v0 must be >= 0, got {}", self.v0)));
        }
        Ok(())
    }
}

/// Which stochastic model drives the forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dynamics {
    Gbm,
    MertonJump(JumpParams),
    Heston(HestonParams),
}

/// A fully specified model: initial forward, diffusion volatility, drift and
/// dynamics. `drift = 0` is the pricing measure for all three models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    /// Initial forward price `F_0`.
    pub f0: f64,
    /// Diffusion volatility `sigma` (ignored by Heston, whose variance is
    /// stochastic).
    pub vol: f64,
    /// Log-level drift `mu` under the simulation measure.
    pub drift: f64,
    pub dynamics: Dynamics,
}

impl ModelSpec {
    pub fn gbm(f0: f64, vol: f64) -> Self {
        Self { f0, vol, drift: 0.0, dynamics: Dynamics::Gbm }
    }

    pub fn merton(f0: f64, vol: f64, jumps: JumpParams) -> Self {
        Self { f0, vol, drift: 0.0, dynamics: Dynamics::MertonJump(jumps) }
    }

    pub fn heston(f0: f64, params: HestonParams) -> Self {
        Self { f0, vol: params.v0.sqrt(), drift: 0.0, dynamics: Dynamics::Heston(params) }
    }

    /// Same model under a measure with the given drift.
    pub fn with_drift(mut self, drift: f64) -> Self {
        self.drift = drift;
        self
    }

    /// The pricing-measure version of this model (zero drift).
    pub fn pricing(&self) -> Self {
        self.with_drift(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0) || !self.f0.is_finite() {
            return Err(Error::invalid(format!("F0 must be > 0, got {}", self.f0)));
        }
        if !self.drift.is_finite() {
            return Err(Error::invalid("drift must be finite"));
        }
        match self.dynamics {
            Dynamics::Gbm | Dynamics::MertonJump(_) => {
                if !(self.vol > 0.0) || !self.vol.is_finite() {
                    return Err(Error::invalid(format!("sigma must be > 0, got {}", self.vol)));
                }
            }
            Dynamics::Heston(_) => {}
        }
        if let Dynamics::MertonJump(j) = self.dynamics {
            j.validate()?;
        }
        if let Dynamics::Heston(h) = self.dynamics {
            h.validate()?;
        }
        Ok(())
    }

    /// Compact human-readable description used in reports.
    pub fn label(&self) -> String {
        match self.dynamics {
            Dynamics::Gbm => format!("gbm(f0={}, sigma={}, mu={})", self.f0, self.vol, self.drift),
            Dynamics::MertonJump(j) => format!(
                "merton(f0={}, sigma={}, mu={}, lambda={}, mJ={}, sJ={})",
                self.f0, self.vol, self.drift, j.intensity, j.mean_log_jump, j.sd_log_jump
            ),
            Dynamics::Heston(h) => format!(
                "heston(f0={}, mu={}, kappa={}, theta={}, xi={}, rho={}, v0={})",
                self.f0, self.drift, h.kappa, h.theta, h.xi, h.rho, h.v0
            ),
        }
    }

    /// Whether paths carry a variance component alongside the forward.
    pub fn has_variance_state(&self) -> bool {
        matches!(self.dynamics, Dynamics::Heston(_))
    }
}

// ---------------------------------------------------------------------------
// Path generation
// ---------------------------------------------------------------------------

/// Precomputed per-interval sampling plan.
enum StepPlan {
    Gbm { drift: f64, sd: f64 },
    Merton { drift: f64, sd: f64, lambda_dt: f64, m_j: f64, s_j: f64 },
    Heston { sub_dt: f64 },
}

fn build_plans(model: &ModelSpec, times: &[f64]) -> Vec<StepPlan> {
    times
        .windows(2)
        .map(|w| {
            let dt = w[1] - w[0];
            match model.dynamics {
                Dynamics::Gbm => StepPlan::Gbm {
                    drift: (model.drift - 0.5 * model.vol * model.vol) * dt,
                    sd: model.vol * dt.sqrt(),
                },
                Dynamics::MertonJump(j) => StepPlan::Merton {
                    drift: (model.drift - 0.5 * model.vol * model.vol - j.intensity * j.kbar())
                        * dt,
                    sd: model.vol * dt.sqrt(),
                    lambda_dt: j.intensity * dt,
                    m_j: j.mean_log_jump,
                    s_j: j.sd_log_jump,
                },
                Dynamics::Heston(_) => StepPlan::Heston { sub_dt: dt / HESTON_SUBSTEPS as f64 },
            }
        })
        .collect()
}

/// Fill `xs` (and `vs` for Heston) with one path of the log price at the
/// given monitoring times. `xs[0] = ln F_0` always.
fn log_path_into(
    model: &ModelSpec,
    plans: &[StepPlan],
    rng: &mut ChaCha8Rng,
    xs: &mut [f64],
    mut vs: Option<&mut [f64]>,
) {
    debug_assert_eq!(xs.len(), plans.len() + 1);
    xs[0] = model.f0.ln();
    let mut v = match model.dynamics {
        Dynamics::Heston(h) => h.v0,
        _ => 0.0,
    };
    if let Some(vs) = vs.as_deref_mut() {
        vs[0] = v;
    }
    for (i, plan) in plans.iter().enumerate() {
        let x = xs[i];
        xs[i + 1] = match plan {
            StepPlan::Gbm { drift, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                x + drift + sd * z
            }
            StepPlan::Merton { drift, sd, lambda_dt, m_j, s_j } => {
                let z: f64 = rng.sample(StandardNormal);
                let mut next = x + drift + sd * z;
                if *lambda_dt > 0.0 {
                    let n = Poisson::new(*lambda_dt).expect("positive rate").sample(rng) as u64;
                    if n > 0 {
                        let zj: f64 = rng.sample(StandardNormal);
                        // The sum of n iid N(m_J, s_J^2) draws is
                        // N(n m_J, n s_J^2); one normal suffices.
                        next += n as f64 * m_j + s_j * (n as f64).sqrt() * zj;
                    }
                }
                next
            }
            StepPlan::Heston { sub_dt } => {
                let h = match model.dynamics {
                    Dynamics::Heston(h) => h,
                    _ => unreachable!(),
                };
                let rho_perp = (1.0 - h.rho * h.rho).sqrt();
                let mut xc = x;
                for _ in 0..HESTON_SUBSTEPS {
                    let zv: f64 = rng.sample(StandardNormal);
                    let zp: f64 = rng.sample(StandardNormal);
                    let zs = h.rho * zv + rho_perp * zp;
                    let v_plus = v.max(0.0);
                    let vol_step = (v_plus * sub_dt).sqrt();
                    xc += model.drift * sub_dt - 0.5 * v_plus * sub_dt + vol_step * zs;
                    v += h.kappa * (h.theta - v_plus) * sub_dt + h.xi * vol_step * zv;
                }
                xc
            }
        };
        if let Some(vs) = vs.as_deref_mut() {
            vs[i + 1] = v;
        }
    }
}

/// Run `f` over every simulated path (log levels, plus variance levels for
/// Heston), in parallel, and collect the per-path results in path order.
///
/// Path `i` uses RNG stream `i` of the seeded generator, so the panel is
/// independent of the rayon thread count.
pub(crate) fn map_paths<T, F>(
    model: &ModelSpec,
    times: &[f64],
    n_paths: usize,
    seed: u64,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &[f64], Option<&[f64]>) -> T + Sync,
{
    model.validate()?;
    if n_paths == 0 {
        return Err(Error::invalid("need at least one path"));
    }
    let plans = build_plans(model, times);
    let n_times = times.len();
    let with_v = model.has_variance_state();
    let out: Vec<T> = (0..n_paths)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n_times], vec![0.0; if with_v { n_times } else { 0 }]),
            |(xs, vs), idx| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(idx as u64);
                let vslice = if with_v { Some(vs.as_mut_slice()) } else { None };
                log_path_into(model, &plans, &mut rng, xs, vslice);
                f(idx, xs, if with_v { Some(vs.as_slice()) } else { None })
            },
        )
        .collect();
    Ok(out)
}

// ---------------------------------------------------------------------------
// Path panels
// ---------------------------------------------------------------------------

const PANEL_MAGIC: &[u8; 4] = b"DIPN";
const PANEL_VERSION: u32 = 1;

/// A panel of simulated component levels: `n_paths` paths observed at the
/// partition times, each carrying one or more named components.
///
/// Model paths store the forward level `"F"` (and the variance `"V"` for
/// Heston). Data layout is row-major `[path][time][component]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPanel {
    pub partition: Partition,
    pub components: Vec<String>,
    pub n_paths: usize,
    pub seed: u64,
    data: Vec<f64>,
}

impl PathPanel {
    pub(crate) fn from_raw(
        partition: Partition,
        components: Vec<String>,
        n_paths: usize,
        seed: u64,
        data: Vec<f64>,
    ) -> Result<Self> {
        let expected = n_paths * partition.times().len() * components.len();
        if data.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: data.len() });
        }
        Ok(Self { partition, components, n_paths, seed, data })
    }

    pub fn n_times(&self) -> usize {
        self.partition.times().len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Index of a component label.
    pub fn component_index(&self, label: &str) -> Result<usize> {
        self.components
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::LabelMismatch(format!("panel has no component {label:?}")))
    }

    /// Level of component `comp` on path `path` at time index `time`.
    pub fn value(&self, path: usize, time: usize, comp: usize) -> f64 {
        self.data[(path * self.n_times() + time) * self.n_components() + comp]
    }

    /// All component levels of one path at one time.
    pub fn slice(&self, path: usize, time: usize) -> &[f64] {
        let w = self.n_components();
        let start = (path * self.n_times() + time) * w;
        &self.data[start..start + w]
    }

    /// Write the panel as tidy CSV with header `path,time,component,value`.
    pub fn write_csv<P: AsRef<FsPath>>(&self, path: P) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["path", "time", "component", "value"])?;
        for p in 0..self.n_paths {
            for (ti, t) in self.partition.times().iter().enumerate() {
                for (ci, c) in self.components.iter().enumerate() {
                    w.write_record([
                        p.to_string(),
                        format!("{t}"),
                        c.clone(),
                        format!("{}", self.value(p, ti, ci)),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Write the panel in the native binary format (little-endian; exact
    /// round trip of every f64).
    pub fn write_binary<P: AsRef<FsPath>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(PANEL_MAGIC)?;
        w.write_all(&PANEL_VERSION.to_le_bytes())?;
        w.write_all(&(self.n_paths as u64).to_le_bytes())?;
        w.write_all(&(self.n_times() as u64).to_le_bytes())?;
        w.write_all(&(self.n_components() as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        write_str(&mut w, self.partition.label())?;
        for t in self.partition.times() {
            w.write_all(&t.to_le_bytes())?;
        }
        for c in &self.components {
            write_str(&mut w, c)?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a panel written by [`PathPanel::write_binary`].
    pub fn read_binary<P: AsRef<FsPath>>(path: P) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != PANEL_MAGIC {
            return Err(Error::invalid("not a panel file (bad magic)"));
        }
        let version = read_u32(&mut r)?;
        if version != PANEL_VERSION {
            return Err(Error::invalid(format!("unsupported panel version {version}")));
        }
        let n_paths = read_u64(&mut r)? as usize;
        let n_times = read_u64(&mut r)? as usize;
        let n_comp = read_u64(&mut r)? as usize;
        let seed = read_u64(&mut r)?;
        let label = read_str(&mut r)?;
        let mut times = Vec::with_capacity(n_times);
        for _ in 0..n_times {
            times.push(read_f64(&mut r)?);
        }
        let mut components = Vec::with_capacity(n_comp);
        for _ in 0..n_comp {
            components.push(read_str(&mut r)?);
        }
        let mut data = vec![0.0; n_paths * n_times * n_comp];
        for v in data.iter_mut() {
            *v = read_f64(&mut r)?;
        }
        let partition = Partition::from_times(times, label)?;
        Self::from_raw(partition, components, n_paths, seed, data)
    }
}

fn write_str<W: IoWrite>(w: &mut W, s: &str) -> Result<()> {
    let bytes = s.as_bytes();
    w.write_all(&(bytes.len() as u32).to_le_bytes())?;
    w.write_all(bytes)?;
    Ok(())
}

fn read_str<R: IoRead>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(Error::invalid("panel string field too long"));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::invalid("panel string field is not utf-8"))
}

fn read_u32<R: IoRead>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: IoRead>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: IoRead>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Simulate a panel of forward paths (component `"F"`, plus `"V"` for
/// Heston) on the partition.
pub fn simulate_paths(
    model: &ModelSpec,
    partition: &Partition,
    n_paths: usize,
    seed: u64,
) -> Result<PathPanel> {
    let times = partition.times();
    let with_v = model.has_variance_state();
    let n_comp = if with_v { 2 } else { 1 };
    let rows = map_paths(model, times, n_paths, seed, |_, xs, vs| {
        let mut row = Vec::with_capacity(times.len() * n_comp);
        for (i, x) in xs.iter().enumerate() {
            row.push(x.exp());
            if let Some(vs) = vs {
                row.push(vs[i]);
            }
        }
        row
    })?;
    let mut data = Vec::with_capacity(n_paths * times.len() * n_comp);
    for row in rows {
        data.extend_from_slice(&row);
    }
    let components = if with_v {
        vec!["F".to_string(), "V".to_string()]
    } else {
        vec!["F".to_string()]
    };
    PathPanel::from_raw(partition.clone(), components, n_paths, seed, data)
}
