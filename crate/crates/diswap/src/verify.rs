//! Monte Carlo and analytic verification of discretisation invariance.
//!
//! The aggregation property says the floating leg's expectation does not
//! depend on the monitoring partition:
//!
//! ```text
//!   E[ sum over partition of phi(z_hat) ] = E[ phi(z_T - z_0) ]   for all partitions.
//! ```
//!
//! [`ap_check`] estimates every partition's leg on the *same* simulated paths
//! (evaluated along the union of all partitions), so each non-trivial
//! partition can be compared to the one-step reference with a paired z-score
//! - differences of legs on common paths have far smaller variance than the
//! legs themselves. Alongside, each realised increment is re-evaluated in the
//! dual form (as a two-argument function of consecutive log levels) and
//! compared pathwise.
//!
//! [`delta_n`] measures the partition effect of a candidate pay-off as the
//! paired difference between a coarse partition and its refinement: zero (to
//! Monte Carlo noise) inside the space, `O(1/n)` for squared-log-return
//! swaps. [`pde_residual`] checks the local characterisation instead: for
//! `phi` in the space the matrix
//!
//! ```text
//!   R = B11 + D B21 + B12 D + D B22 D - diag((J_x(z_hat) - J_x(0)) / F^2)
//! ```
//!
//! vanishes identically, where `B = H(z_hat) - H(0)` are the Hessian blocks,
//! `J` the gradient and `D = diag(1/F)`. [`premium_study`] compares the
//! realised leg under a drifted measure with the fair value, using common
//! random numbers for pay-offs without a model-free rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytic::{ComponentPricer, TimeSlice};
use crate::error::{Error, Result};
use crate::kahan::{compensated_sum, CompensatedSum};
use crate::payoffs::{classic_eval, ClassicPayoffKind, Component, DiPayoff, SwapPayoff};
use crate::simulate::{map_paths, Dynamics, ModelSpec, Partition};
use crate::swaps::{fair_value_parts, FairValueParts, MarketState};

/// Monte Carlo estimate of a swap rate: sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RateEstimate {
    pub mean: f64,
    pub se: f64,
    pub n_paths: usize,
}

/// One partition's leg estimate inside an aggregation-property check,
/// with the paired z-score against the one-step reference.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PartitionEstimate {
    pub label: String,
    pub mean: f64,
    pub se: f64,
    /// `(mean - reference mean) / SE(paired difference)`.
    pub z: f64,
    pub n_paths: usize,
}

/// Outcome of an aggregation-property check.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ApVerdict {
    pub payoff: String,
    pub model: String,
    /// Estimate on the trivial partition `{0, T}` (the T-claim value).
    pub reference: RateEstimate,
    pub partitions: Vec<PartitionEstimate>,
    pub max_abs_z: f64,
    pub z_threshold: f64,
    /// Increments re-evaluated in the dual (two-argument) form.
    pub dual_checked: u64,
    /// Increments skipped because a log-bearing level was not positive.
    pub dual_skipped: u64,
    pub dual_max_err: f64,
    pub dual_tol: f64,
    pub dual_pass: bool,
    /// True when every partition's z-score is within the threshold and the
    /// dual identity held pathwise.
    pub pass: bool,
}

// ---------------------------------------------------------------------------
// Realised legs
// ---------------------------------------------------------------------------

struct DiLadder {
    comps: Vec<Component>,
    slices: Vec<TimeSlice>,
    forward_idx: Vec<bool>,
}

enum LegEval<'a> {
    Classic(ClassicPayoffKind),
    Di { payoff: &'a DiPayoff, ladder: DiLadder },
}

struct PathLegs {
    legs: Vec<f64>,
    dual_checked: u64,
    dual_skipped: u64,
    dual_max_err: f64,
    phi_scale: f64,
}

fn build_leg_eval<'a>(
    payoff: &'a SwapPayoff,
    model: &ModelSpec,
    timeline: &Partition,
) -> Result<LegEval<'a>> {
    match payoff {
        SwapPayoff::Classic(kind) => {
            if *kind == ClassicPayoffKind::NeubergerPsi {
                return Err(Error::Unsupported(
                    "the psi pay-off weights the remaining fair value; its realised leg \
                     is not a function of the log increments alone"
                        .into(),
                ));
            }
            Ok(LegEval::Classic(*kind))
        }
        SwapPayoff::Di(p) => {
            let comps = p.components()?;
            let pricer = ComponentPricer::new(&model.pricing(), timeline.maturity())?;
            let slices =
                timeline.times().iter().map(|&t| pricer.slice(t)).collect::<Result<Vec<_>>>()?;
            let forward_idx = comps.iter().map(|c| matches!(c, Component::Forward)).collect();
            // Surface unsupported component/model pairs deterministically.
            for c in &comps {
                slices[0].level(*c, model.f0.ln(), initial_variance(model))?;
            }
            Ok(LegEval::Di { payoff: p, ladder: DiLadder { comps, slices, forward_idx } })
        }
    }
}

fn initial_variance(model: &ModelSpec) -> Option<f64> {
    match model.dynamics {
        Dynamics::Heston(h) => Some(h.v0),
        _ => None,
    }
}

/// Per-path evaluation state for one leg runner.
struct LegWorkspace {
    /// Component levels at every timeline time, row-major `[time][comp]`.
    levels: Vec<f64>,
    f_hat: Vec<f64>,
    x_hat: Vec<f64>,
}

impl LegEval<'_> {
    fn dim(&self) -> usize {
        match self {
            LegEval::Classic(_) => 1,
            LegEval::Di { payoff, .. } => payoff.dim(),
        }
    }

    fn fill_levels(&self, xs: &[f64], vs: Option<&[f64]>, ws: &mut LegWorkspace) -> Result<()> {
        if let LegEval::Di { ladder, .. } = self {
            let d = ladder.comps.len();
            ws.levels.clear();
            ws.levels.reserve(xs.len() * d);
            for (i, &x) in xs.iter().enumerate() {
                for c in &ladder.comps {
                    ws.levels.push(ladder.slices[i].level(*c, x, vs.map(|v| v[i]))?);
                }
            }
        }
        Ok(())
    }

    /// `phi` on the increment between timeline indices `a < b`, in both the
    /// primal form (log increments from the simulated path) and the dual form
    /// (from the two level snapshots). Returns `(phi, dual_err)`; `dual_err`
    /// is `None` when a log-bearing level is not positive.
    fn increment(
        &self,
        xs: &[f64],
        a: usize,
        b: usize,
        ws: &mut LegWorkspace,
    ) -> Result<(f64, Option<f64>)> {
        match self {
            LegEval::Classic(kind) => {
                let x_hat = xs[b] - xs[a];
                let phi = classic_eval(*kind, x_hat, None)?;
                // Dual route: recover the log increment from the levels.
                let dual_x = xs[b].exp().ln() - xs[a].exp().ln();
                let dual = classic_eval(*kind, dual_x, None)?;
                Ok((phi, Some((phi - dual).abs())))
            }
            LegEval::Di { payoff, ladder } => {
                let d = ladder.comps.len();
                let (prev, curr) = (&ws.levels[a * d..(a + 1) * d], &ws.levels[b * d..(b + 1) * d]);
                let mut dual_ok = true;
                for i in 0..d {
                    ws.f_hat[i] = curr[i] - prev[i];
                    if !payoff.needs_log(i) {
                        ws.x_hat[i] = 0.0;
                        continue;
                    }
                    ws.x_hat[i] = if ladder.forward_idx[i] {
                        xs[b] - xs[a]
                    } else if prev[i] > 0.0 && curr[i] > 0.0 {
                        (curr[i] / prev[i]).ln()
                    } else {
                        f64::NAN
                    };
                }
                let phi = payoff.eval_parts(&ws.f_hat, &ws.x_hat)?;
                // Dual route: logs taken level by level.
                for i in 0..d {
                    if !payoff.needs_log(i) {
                        continue;
                    }
                    if prev[i] > 0.0 && curr[i] > 0.0 {
                        ws.x_hat[i] = curr[i].ln() - prev[i].ln();
                    } else {
                        dual_ok = false;
                    }
                }
                if !dual_ok {
                    return Ok((phi, None));
                }
                let dual = payoff.eval_parts(&ws.f_hat, &ws.x_hat)?;
                Ok((phi, Some((phi - dual).abs())))
            }
        }
    }
}

/// Per-path realised legs of one pay-off on several partitions that share a
/// common refinement (`timeline`). `index_maps[k]` maps partition `k`'s times
/// into the timeline. Returns per-path results in path order.
fn realised_legs(
    payoff: &SwapPayoff,
    model: &ModelSpec,
    timeline: &Partition,
    index_maps: &[Vec<usize>],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<PathLegs>> {
    let eval = build_leg_eval(payoff, model, timeline)?;
    let d = eval.dim();
    let rows = map_paths(model, timeline.times(), n_paths, seed, |_, xs, vs| {
        let mut ws = LegWorkspace {
            levels: Vec::new(),
            f_hat: vec![0.0; d],
            x_hat: vec![0.0; d],
        };
        eval.fill_levels(xs, vs, &mut ws)?;
        let mut out = PathLegs {
            legs: Vec::with_capacity(index_maps.len()),
            dual_checked: 0,
            dual_skipped: 0,
            dual_max_err: 0.0,
            phi_scale: 0.0,
        };
        for idx in index_maps {
            let mut leg = CompensatedSum::new();
            for w in idx.windows(2) {
                let (phi, dual_err) = eval.increment(xs, w[0], w[1], &mut ws)?;
                leg.add(phi);
                out.phi_scale = out.phi_scale.max(phi.abs());
                match dual_err {
                    Some(e) => {
                        out.dual_checked += 1;
                        out.dual_max_err = out.dual_max_err.max(e);
                    }
                    None => out.dual_skipped += 1,
                }
            }
            out.legs.push(leg.value());
        }
        Ok::<_, Error>(out)
    })?;
    rows.into_iter().collect()
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = compensated_sum(values.iter().cloned()) / n as f64;
    if n < 2 {
        return (mean, f64::INFINITY);
    }
    let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    let var = ss / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Estimate `E[sum of phi]` for one pay-off on one partition.
pub fn estimate_rate(
    payoff: &SwapPayoff,
    model: &ModelSpec,
    partition: &Partition,
    n_paths: usize,
    seed: u64,
) -> Result<RateEstimate> {
    let identity = vec![(0..partition.times().len()).collect::<Vec<_>>()];
    let rows = realised_legs(payoff, model, partition, &identity, n_paths, seed)?;
    let legs: Vec<f64> = rows.iter().map(|r| r.legs[0]).collect();
    let (mean, se) = mean_se(&legs);
    Ok(RateEstimate { mean, se, n_paths })
}

/// Aggregation-property check: estimate the floating leg on every partition
/// with common paths and compare each to the trivial one-step reference.
///
/// All partitions must share the same maturity. The verdict passes when
/// every paired z-score is within `z_threshold` and the dual-form identity
/// holds to rounding on every checked increment.
pub fn ap_check(
    payoff: &SwapPayoff,
    model: &ModelSpec,
    partitions: &[Partition],
    n_paths: usize,
    seed: u64,
    z_threshold: f64,
) -> Result<ApVerdict> {
    if partitions.is_empty() {
        return Err(Error::InvalidPartition("need at least one partition to check".into()));
    }
    if !(z_threshold > 0.0) {
        return Err(Error::invalid(format!("z threshold must be > 0, got {z_threshold}")));
    }
    let maturity = partitions[0].maturity();
    let reference = Partition::trivial(maturity)?;
    let mut timeline = reference.clone();
    for p in partitions {
        timeline = timeline.union(p)?; // errors if maturities differ
    }
    let mut index_maps = vec![reference.index_map(&timeline)?];
    for p in partitions {
        index_maps.push(p.index_map(&timeline)?);
    }
    let rows = realised_legs(payoff, model, &timeline, &index_maps, n_paths, seed)?;

    let ref_legs: Vec<f64> = rows.iter().map(|r| r.legs[0]).collect();
    let (ref_mean, ref_se) = mean_se(&ref_legs);
    let mut estimates = Vec::with_capacity(partitions.len());
    let mut max_abs_z = 0.0f64;
    for (k, p) in partitions.iter().enumerate() {
        let legs: Vec<f64> = rows.iter().map(|r| r.legs[k + 1]).collect();
        let (mean, se) = mean_se(&legs);
        let diffs: Vec<f64> = legs.iter().zip(&ref_legs).map(|(a, b)| a - b).collect();
        let (d_mean, d_se) = mean_se(&diffs);
        let z = if d_se > 0.0 { d_mean / d_se } else { 0.0 };
        max_abs_z = max_abs_z.max(z.abs());
        estimates.push(PartitionEstimate {
            label: p.label().to_string(),
            mean,
            se,
            z,
            n_paths,
        });
    }
    let dual_checked: u64 = rows.iter().map(|r| r.dual_checked).sum();
    let dual_skipped: u64 = rows.iter().map(|r| r.dual_skipped).sum();
    let dual_max_err = rows.iter().map(|r| r.dual_max_err).fold(0.0, f64::max);
    let phi_scale = rows.iter().map(|r| r.phi_scale).fold(0.0, f64::max);
    let dual_tol = 1e-12 * phi_scale.max(1.0);
    let dual_pass = dual_max_err <= dual_tol;
    let pass = max_abs_z <= z_threshold && dual_pass;
    Ok(ApVerdict {
        payoff: payoff.label(),
        model: model.label(),
        reference: RateEstimate { mean: ref_mean, se: ref_se, n_paths },
        partitions: estimates,
        max_abs_z,
        z_threshold,
        dual_checked,
        dual_skipped,
        dual_max_err,
        dual_tol,
        dual_pass,
        pass,
    })
}

/// Paired estimate of the partition effect `E[leg on coarse] - E[leg on its
/// refinement]`: zero (to noise) for pay-offs in the space, `O(1/n)`
/// otherwise.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DeltaEstimate {
    pub coarse: String,
    pub fine: String,
    pub fine_factor: usize,
    pub mean: f64,
    pub se: f64,
    pub n_paths: usize,
}

/// Estimate the partition effect of a pay-off by refining each step of
/// `coarse` into `fine_factor` equal pieces and differencing the two legs
/// path by path.
pub fn delta_n(
    payoff: &SwapPayoff,
    model: &ModelSpec,
    coarse: &Partition,
    fine_factor: usize,
    n_paths: usize,
    seed: u64,
) -> Result<DeltaEstimate> {
    if fine_factor < 2 {
        return Err(Error::invalid(format!(
            "fine_factor must be at least 2, got {fine_factor}"
        )));
    }
    let fine = coarse.refine(fine_factor)?;
    let index_maps = vec![coarse.index_map(&fine)?, (0..fine.times().len()).collect()];
    let rows = realised_legs(payoff, model, &fine, &index_maps, n_paths, seed)?;
    let diffs: Vec<f64> = rows.iter().map(|r| r.legs[0] - r.legs[1]).collect();
    let (mean, se) = mean_se(&diffs);
    Ok(DeltaEstimate {
        coarse: coarse.label().to_string(),
        fine: fine.label().to_string(),
        fine_factor,
        mean,
        se,
        n_paths,
    })
}

// ---------------------------------------------------------------------------
// PDE residual
// ---------------------------------------------------------------------------

/// A candidate pay-off function of the increment `z_hat = (F_hat, x_hat)`.
pub enum Candidate<'a> {
    /// A pay-off in the space (analytic derivatives available).
    Payoff(&'a DiPayoff),
    /// An arbitrary increment function, differentiated numerically.
    Function {
        dim: usize,
        f: &'a (dyn Fn(&[f64], &[f64]) -> f64 + Sync),
    },
}

impl Candidate<'_> {
    fn dim(&self) -> usize {
        match self {
            Candidate::Payoff(p) => p.dim(),
            Candidate::Function { dim, .. } => *dim,
        }
    }

    fn eval(&self, f_hat: &[f64], x_hat: &[f64]) -> Result<f64> {
        match self {
            Candidate::Payoff(p) => p.eval_parts(f_hat, x_hat),
            Candidate::Function { f, .. } => Ok(f(f_hat, x_hat)),
        }
    }
}

/// How to obtain the derivatives entering the residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivMode {
    /// Closed-form gradient and Hessian (pay-offs in the space only).
    Analytic,
    /// Central finite differences with step `h` in each of the `2d`
    /// increment coordinates.
    FiniteDifference { h: f64 },
}

/// One evaluation point of the residual: component forward levels (all
/// positive) and an increment at which to differentiate.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EvalPoint {
    pub levels: Vec<f64>,
    pub f_hat: Vec<f64>,
    pub x_hat: Vec<f64>,
}

/// Residual matrices of the local invariance equation at each point.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ResidualReport {
    pub mode: String,
    pub n_points: usize,
    /// Row-major `d x d` residual matrix per point.
    pub residuals: Vec<Vec<f64>>,
    /// Frobenius norm per point.
    pub frobenius: Vec<f64>,
    pub max_frobenius: f64,
}

/// Uniformly random evaluation points: levels in `(50, 150)`, level
/// increments in `(-15, 15)`, log increments in `(-0.25, 0.25)`.
pub fn random_points(dim: usize, n: usize, seed: u64) -> Vec<EvalPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| EvalPoint {
            levels: (0..dim).map(|_| rng.gen_range(50.0..150.0)).collect(),
            f_hat: (0..dim).map(|_| rng.gen_range(-15.0..15.0)).collect(),
            x_hat: (0..dim).map(|_| rng.gen_range(-0.25..0.25)).collect(),
        })
        .collect()
}

/// Evaluate the local invariance residual of a candidate at each point.
///
/// For a pay-off in the space with analytic derivatives the residual is
/// identically zero: the `F`-block Hessian is the constant `2 Omega` (so its
/// increment vanishes) and the diagonal `beta e^{x_hat}` block cancels the
/// gradient term exactly - the code subtracts the same computed quantity it
/// adds, so the result is bitwise zero.
pub fn pde_residual(
    candidate: &Candidate,
    points: &[EvalPoint],
    mode: DerivMode,
) -> Result<ResidualReport> {
    let d = candidate.dim();
    if points.is_empty() {
        return Err(Error::invalid("need at least one evaluation point"));
    }
    let mode_label = match mode {
        DerivMode::Analytic => "analytic".to_string(),
        DerivMode::FiniteDifference { h } => format!("fd(h={h})"),
    };
    if let (DerivMode::Analytic, Candidate::Function { .. }) = (mode, candidate) {
        return Err(Error::Unsupported(
            "analytic derivatives are only available for pay-offs in the space".into(),
        ));
    }
    if let DerivMode::FiniteDifference { h } = mode {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid(format!("finite-difference step must be > 0, got {h}")));
        }
    }
    let mut residuals = Vec::with_capacity(points.len());
    let mut frobenius = Vec::with_capacity(points.len());
    let mut max_frobenius = 0.0f64;
    for p in points {
        if p.levels.len() != d || p.f_hat.len() != d || p.x_hat.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: p.levels.len() });
        }
        if p.levels.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
            return Err(Error::invalid("evaluation point levels must be positive"));
        }
        let r = match (candidate, mode) {
            (Candidate::Payoff(payoff), DerivMode::Analytic) => analytic_residual(payoff, p),
            (_, DerivMode::FiniteDifference { h }) => fd_residual(candidate, p, h)?,
            _ => unreachable!("rejected above"),
        };
        let fro = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        max_frobenius = max_frobenius.max(fro);
        frobenius.push(fro);
        residuals.push(r);
    }
    Ok(ResidualReport {
        mode: mode_label,
        n_points: points.len(),
        residuals,
        frobenius,
        max_frobenius,
    })
}

fn analytic_residual(payoff: &DiPayoff, p: &EvalPoint) -> Vec<f64> {
    let d = payoff.dim();
    let mut r = vec![0.0; d * d];
    // F-block: H_FF = 2 Omega at every increment, so B11 = 0. Cross blocks
    // are identically zero. The x-block is diag(beta_i e^{x_hat_i}); its
    // increment scaled by D .. D meets the gradient term with the opposite
    // sign.
    for i in 0..d {
        let g = payoff.beta()[i] * p.x_hat[i].exp_m1() / (p.levels[i] * p.levels[i]);
        r[i * d + i] += g; // D (H_xx(z_hat) - H_xx(0)) D
        r[i * d + i] -= g; // (J_x(z_hat) - J_x(0)) Gamma
    }
    r
}

fn fd_residual(candidate: &Candidate, p: &EvalPoint, h: f64) -> Result<Vec<f64>> {
    let d = candidate.dim();
    let m = 2 * d; // increment coordinates: d level parts then d log parts
    let eval = |dz: &[f64]| -> Result<f64> {
        let f_hat: Vec<f64> = (0..d).map(|i| p.f_hat[i] + dz[i]).collect();
        let x_hat: Vec<f64> = (0..d).map(|i| p.x_hat[i] + dz[d + i]).collect();
        candidate.eval(&f_hat, &x_hat)
    };
    let eval0 = |dz: &[f64]| -> Result<f64> {
        let f_hat: Vec<f64> = dz[..d].to_vec();
        let x_hat: Vec<f64> = dz[d..].to_vec();
        candidate.eval(&f_hat, &x_hat)
    };
    let grad = |at_zero: bool| -> Result<Vec<f64>> {
        let mut g = vec![0.0; m];
        let mut dz = vec![0.0; m];
        for k in 0..m {
            dz[k] = h;
            let up = if at_zero { eval0(&dz)? } else { eval(&dz)? };
            dz[k] = -h;
            let dn = if at_zero { eval0(&dz)? } else { eval(&dz)? };
            dz[k] = 0.0;
            g[k] = (up - dn) / (2.0 * h);
        }
        Ok(g)
    };
    let hess = |at_zero: bool| -> Result<Vec<f64>> {
        let f = |dz: &[f64]| if at_zero { eval0(dz) } else { eval(dz) };
        let mut hm = vec![0.0; m * m];
        let base = f(&vec![0.0; m])?;
        let mut dz = vec![0.0; m];
        for k in 0..m {
            dz[k] = h;
            let up = f(&dz)?;
            dz[k] = -h;
            let dn = f(&dz)?;
            dz[k] = 0.0;
            hm[k * m + k] = (up - 2.0 * base + dn) / (h * h);
        }
        for k in 0..m {
            for l in (k + 1)..m {
                let mut v = 0.0;
                for (sk, sl, sign) in
                    [(h, h, 1.0), (h, -h, -1.0), (-h, h, -1.0), (-h, -h, 1.0)]
                {
                    dz[k] = sk;
                    dz[l] = sl;
                    v += sign * f(&dz)?;
                    dz[k] = 0.0;
                    dz[l] = 0.0;
                }
                let v = v / (4.0 * h * h);
                hm[k * m + l] = v;
                hm[l * m + k] = v;
            }
        }
        Ok(hm)
    };
    let (g1, g0) = (grad(false)?, grad(true)?);
    let (h1, h0) = (hess(false)?, hess(true)?);
    let b = |k: usize, l: usize| h1[k * m + l] - h0[k * m + l];
    let mut r = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let (fi, fj) = (p.levels[i], p.levels[j]);
            // B11 + D B21 + B12 D + D B22 D, with D = diag(1/F).
            let mut v = b(i, j) + b(d + i, j) / fi + b(i, d + j) / fj
                + b(d + i, d + j) / (fi * fj);
            if i == j {
                v -= (g1[d + i] - g0[d + i]) / (fi * fi);
            }
            r[i * d + j] = v;
        }
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// Risk premium
// ---------------------------------------------------------------------------

/// Realised leg under a drifted measure against the fair value.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PremiumReport {
    pub payoff: String,
    pub model: String,
    pub partition: String,
    pub n_paths: usize,
    /// Mean and standard error of the realised leg under the given measure.
    pub realised_mean: f64,
    pub realised_se: f64,
    /// Cross-path sample variance of the realised leg.
    pub realised_variance: f64,
    /// Fair value: analytic for pay-offs in the space, a common-random-number
    /// estimate under the zero-drift measure otherwise.
    pub fair_value: f64,
    /// Standard error of the fair value (zero when analytic).
    pub fair_se: f64,
    pub premium: f64,
    /// Standard error of the premium (paired when the fair value is
    /// estimated on common paths).
    pub premium_se: f64,
    /// Quadratic/log split of the analytic fair value, when available.
    pub decomposition: Option<FairValueParts>,
}

/// Estimate the risk premium `E[realised leg] - fair value` of a pay-off
/// under the measure carried by `model` (its drift).
///
/// Pay-offs in the space use the analytic fair value, which the monitoring
/// partition cannot move. Classic pay-offs outside the space re-simulate the
/// same seed under zero drift and difference the legs path by path, so the
/// premium's standard error reflects only the drift effect.
pub fn premium_study(
    payoff: &SwapPayoff,
    model: &ModelSpec,
    partition: &Partition,
    n_paths: usize,
    seed: u64,
) -> Result<PremiumReport> {
    let identity = vec![(0..partition.times().len()).collect::<Vec<_>>()];
    let rows = realised_legs(payoff, model, partition, &identity, n_paths, seed)?;
    let legs: Vec<f64> = rows.iter().map(|r| r.legs[0]).collect();
    let (realised_mean, realised_se) = mean_se(&legs);
    let realised_variance = {
        let n = legs.len();
        let ss = compensated_sum(legs.iter().map(|v| {
            let e = v - realised_mean;
            e * e
        }));
        if n > 1 {
            ss / (n - 1) as f64
        } else {
            f64::NAN
        }
    };
    let (fair, fair_se, premium, premium_se, decomposition) = match payoff {
        SwapPayoff::Di(p) => {
            let state = MarketState::from_model(p, model, partition.maturity())?;
            let parts = fair_value_parts(p, &state)?;
            let fair = parts.total();
            (fair, 0.0, realised_mean - fair, realised_se, Some(parts))
        }
        SwapPayoff::Classic(_) => {
            let pricing = model.pricing();
            let rows_q =
                realised_legs(payoff, &pricing, partition, &identity, n_paths, seed)?;
            let legs_q: Vec<f64> = rows_q.iter().map(|r| r.legs[0]).collect();
            let (fair, fair_se) = mean_se(&legs_q);
            let diffs: Vec<f64> = legs.iter().zip(&legs_q).map(|(a, b)| a - b).collect();
            let (premium, premium_se) = mean_se(&diffs);
            (fair, fair_se, premium, premium_se, None)
        }
    };
    Ok(PremiumReport {
        payoff: payoff.label(),
        model: model.label(),
        partition: partition.label().to_string(),
        n_paths,
        realised_mean,
        realised_se,
        realised_variance,
        fair_value: fair,
        fair_se,
        premium,
        premium_se,
        decomposition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoffs::{lv_payoff, moment_payoff, straddle_payoff};
    use crate::swaps::fair_value;
    use nalgebra::DMatrix;

    fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
        assert!(
            (got - want).abs() <= tol,
            "{what}: expected {want}, got {got} (diff {})",
            (got - want).abs()
        );
    }

    #[test]
    fn estimate_rate_recovers_lv_fair_value() {
        let payoff = SwapPayoff::from(lv_payoff());
        let model = ModelSpec::gbm(100.0, 0.2);
        let partition = Partition::regular(12, 1.0).unwrap();
        let est = estimate_rate(&payoff, &model, &partition, 40_000, 7).unwrap();
        assert_close(est.mean, 0.04, 4.0 * est.se, "LV realised leg");
        assert!(est.se < 2e-4, "se {}", est.se);
    }

    #[test]
    fn ap_check_passes_for_lv_and_moment_swaps() {
        let model = ModelSpec::gbm(100.0, 0.2);
        let partitions = vec![
            Partition::regular(12, 1.0).unwrap(),
            Partition::irregular(48, 1.0, 7).unwrap(),
        ];
        for payoff in [
            SwapPayoff::from(lv_payoff()),
            SwapPayoff::from(moment_payoff(3, 100.0f64.ln() - 0.02).unwrap()),
        ] {
            let verdict = ap_check(&payoff, &model, &partitions, 20_000, 11, 4.0).unwrap();
            assert!(verdict.pass, "verdict failed: {verdict:?}");
            assert_eq!(verdict.partitions.len(), 2);
            assert!(verdict.dual_checked > 0);
            assert_eq!(verdict.dual_skipped, 0);
            assert!(verdict.dual_max_err <= verdict.dual_tol);
        }
    }

    #[test]
    fn ap_check_flags_squared_log_returns() {
        // E[sum of x_hat^2] = sigma^2 T + sigma^4 T^2 / (4 n): the partition
        // effect is tiny, but paired differencing resolves it sharply.
        let payoff = SwapPayoff::Classic(ClassicPayoffKind::SquaredLogReturn);
        let model = ModelSpec::gbm(100.0, 0.5);
        let partitions = vec![Partition::regular(12, 1.0).unwrap()];
        let verdict = ap_check(&payoff, &model, &partitions, 50_000, 3, 4.0).unwrap();
        assert!(!verdict.pass, "squared log returns should fail: {verdict:?}");
        assert!(verdict.max_abs_z > 4.0);
    }

    #[test]
    fn delta_n_matches_gbm_oracle() {
        // Coarse {0, T} against n equal refinements:
        // delta = sigma^4 T^2 / 4 (1 - 1/n) under zero drift.
        let payoff = SwapPayoff::Classic(ClassicPayoffKind::SquaredLogReturn);
        let model = ModelSpec::gbm(100.0, 0.2);
        let coarse = Partition::trivial(1.0).unwrap();
        for n in [4usize, 12] {
            let est = delta_n(&payoff, &model, &coarse, n, 200_000, 5).unwrap();
            let want = 0.2f64.powi(4) / 4.0 * (1.0 - 1.0 / n as f64);
            assert_close(est.mean, want, 3.0 * est.se, &format!("delta at n={n}"));
        }
        assert!(delta_n(&payoff, &model, &coarse, 1, 100, 5).is_err());
    }

    #[test]
    fn delta_n_is_noise_for_di_payoffs() {
        let payoff = SwapPayoff::from(lv_payoff());
        let model = ModelSpec::gbm(100.0, 0.2);
        let coarse = Partition::regular(4, 1.0).unwrap();
        let est = delta_n(&payoff, &model, &coarse, 3, 50_000, 9).unwrap();
        assert!(est.mean.abs() <= 4.0 * est.se, "delta {} vs se {}", est.mean, est.se);
    }

    #[test]
    fn analytic_residual_is_bitwise_zero() {
        let payoff = DiPayoff::from_slices(
            &["F", "X"],
            &[0.7, -0.2],
            &[&[0.3, -0.05], &[-0.05, 0.12]],
            &[1.4, 0.0],
            &[-0.8, 0.3],
        )
        .unwrap();
        let points = random_points(2, 25, 17);
        let report =
            pde_residual(&Candidate::Payoff(&payoff), &points, DerivMode::Analytic).unwrap();
        assert_eq!(report.max_frobenius, 0.0, "analytic residual must vanish identically");
    }

    #[test]
    fn fd_residual_is_small_for_space_payoffs() {
        let payoff = lv_payoff();
        let points = random_points(2, 10, 3);
        let report = pde_residual(
            &Candidate::Payoff(&payoff),
            &points,
            DerivMode::FiniteDifference { h: 1e-4 },
        )
        .unwrap();
        assert!(report.max_frobenius <= 1e-6, "fd residual {}", report.max_frobenius);
    }

    #[test]
    fn fd_residual_detects_squared_log_returns() {
        // phi = x_hat^2: R = -2 x_hat / F^2 exactly (the Hessian is constant).
        let f = |_fh: &[f64], xh: &[f64]| xh[0] * xh[0];
        let candidate = Candidate::Function { dim: 1, f: &f };
        let point = EvalPoint { levels: vec![2.0], f_hat: vec![0.3], x_hat: vec![0.1] };
        let report = pde_residual(
            &candidate,
            std::slice::from_ref(&point),
            DerivMode::FiniteDifference { h: 1e-3 },
        )
        .unwrap();
        let want = -2.0 * 0.1 / 4.0;
        assert_close(report.residuals[0][0], want, 1e-10, "x_hat^2 residual");
        assert_close(want, -0.05, 0.0, "oracle value");
        // Analytic derivatives are not available for raw functions.
        assert!(pde_residual(&candidate, &[point], DerivMode::Analytic).is_err());
    }

    #[test]
    fn fd_residual_converges_at_second_order() {
        // phi = x_hat^4 has residual (12 x_hat^2 - 4 x_hat^3)/F^2; the
        // finite-difference error shrinks like h^2.
        let f = |_fh: &[f64], xh: &[f64]| xh[0].powi(4);
        let candidate = Candidate::Function { dim: 1, f: &f };
        let point = EvalPoint { levels: vec![1.5], f_hat: vec![0.0], x_hat: vec![0.4] };
        let truth = (12.0 * 0.4f64.powi(2) - 4.0 * 0.4f64.powi(3)) / (1.5 * 1.5);
        let err = |h: f64| {
            let report = pde_residual(
                &candidate,
                std::slice::from_ref(&point),
                DerivMode::FiniteDifference { h },
            )
            .unwrap();
            (report.residuals[0][0] - truth).abs()
        };
        let (e1, e2, e3) = (err(0.04), err(0.02), err(0.01));
        let (r1, r2) = (e1 / e2, e2 / e3);
        assert!((2.5..6.0).contains(&r1), "ratio {r1} not ~4 (errors {e1}, {e2})");
        assert!((2.5..6.0).contains(&r2), "ratio {r2} not ~4 (errors {e2}, {e3})");
    }

    #[test]
    fn premium_study_for_squared_log_returns() {
        // mu (mu - sigma^2) T^2 / n for x_hat^2 under drift mu.
        let payoff = SwapPayoff::Classic(ClassicPayoffKind::SquaredLogReturn);
        let model = ModelSpec::gbm(100.0, 0.2).with_drift(0.08);
        let partition = Partition::regular(12, 1.0).unwrap();
        let report = premium_study(&payoff, &model, &partition, 50_000, 13).unwrap();
        let want = 0.08 * (0.08 - 0.04) / 12.0;
        assert_close(report.premium, want, 3.0 * report.premium_se, "premium");
        // Pairing shrinks the standard error well below the unpaired
        // sd(leg)/sqrt(n) ~ 7e-5.
        assert!(report.premium_se < 2e-5, "paired se {}", report.premium_se);
        let var_want = 2.0 * 0.2f64.powi(4) / 12.0 + 4.0 * 0.08f64.powi(2) * 0.04 / 144.0;
        assert_close(
            report.realised_variance,
            var_want,
            0.05 * var_want,
            "realised leg variance",
        );
        assert!(report.decomposition.is_none());
    }

    #[test]
    fn premium_study_for_di_payoff_uses_analytic_fair_value() {
        let payoff = SwapPayoff::from(lv_payoff());
        let model = ModelSpec::gbm(100.0, 0.2).with_drift(0.08);
        let partition = Partition::regular(12, 1.0).unwrap();
        let report = premium_study(&payoff, &model, &partition, 30_000, 19).unwrap();
        assert_close(report.fair_value, 0.04, 1e-13, "analytic fair value");
        assert_eq!(report.fair_se, 0.0);
        // The beta and gamma legs cancel at first order in the drift, so the
        // log variance premium is n * 2(e^{mu dt} - 1 - mu dt) ~ mu^2 T^2 / n.
        let mu_dt = 0.08_f64 / 12.0;
        let want = 12.0 * 2.0 * (mu_dt.exp() - 1.0 - mu_dt);
        assert_close(report.premium, want, 4.0 * report.premium_se, "LV premium");
        let parts = report.decomposition.unwrap();
        assert_eq!(parts.quadratic_term, 0.0);
    }

    #[test]
    fn psi_realised_leg_is_rejected() {
        let payoff = SwapPayoff::Classic(ClassicPayoffKind::NeubergerPsi);
        let model = ModelSpec::gbm(100.0, 0.2);
        let partition = Partition::regular(4, 1.0).unwrap();
        assert!(matches!(
            estimate_rate(&payoff, &model, &partition, 10, 1),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn ap_check_requires_matching_maturities() {
        let payoff = SwapPayoff::from(lv_payoff());
        let model = ModelSpec::gbm(100.0, 0.2);
        let partitions =
            vec![Partition::regular(4, 1.0).unwrap(), Partition::regular(4, 0.5).unwrap()];
        assert!(ap_check(&payoff, &model, &partitions, 10, 1, 4.0).is_err());
    }

    #[test]
    fn straddle_ap_check_small_scale() {
        let omega = DMatrix::from_row_slice(1, 1, &[1.0]);
        let di = straddle_payoff(&[100.0], &omega).unwrap();
        let payoff = SwapPayoff::from(di.clone());
        let model = ModelSpec::gbm(100.0, 0.2);
        let partitions = vec![Partition::regular(6, 1.0).unwrap()];
        let verdict = ap_check(&payoff, &model, &partitions, 4000, 23, 4.0).unwrap();
        assert!(verdict.pass, "straddle verdict: {verdict:?}");
        // The straddle pay-off carries no log legs, so the dual form shares
        // the level increments and never skips.
        assert!(verdict.dual_checked > 0);
        assert_eq!(verdict.dual_skipped, 0);
        let state = MarketState::from_model(&di, &model, 1.0).unwrap();
        let fair = fair_value(&di, &state).unwrap();
        let se = verdict.reference.se;
        assert_close(verdict.reference.mean, fair, 4.0 * se, "straddle T-claim vs fair");
    }
}
