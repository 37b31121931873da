//! `diswap` - price, hedge and verify discretisation-invariant swap
//! contracts from the command line.
//!
//! Exit codes: `0` on success (and on passing verifications), `2` when a
//! verification ran but failed its threshold, `1` for usage and data errors.

mod inputs;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use diswap::hedging::{hedge_panel, hedge_path};
use diswap::replication::default_grid;
use diswap::swaps::fair_value_parts;
use diswap::verify::{ap_check, delta_n, pde_residual, premium_study, random_points, Candidate, DerivMode};
use diswap::{
    DiPayoff, HestonParams, JumpParams, MarketState, ModelSpec, OptionChain, Partition, SwapPayoff,
};

use inputs::{load_payoff, parse_partitions, Config};
use output::{emit, resolve_out_path, write_atomic, write_csv_table};

#[derive(Parser)]
#[command(
    name = "diswap",
    version,
    about = "Price, hedge and verify discretisation-invariant swap contracts"
)]
struct Cli {
    /// Flat `key = value` config file; explicit flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Rayon thread-pool size; results do not depend on it
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price a pay-off from a model or an option chain
    Price(PriceArgs),
    /// Simulate the self-financing hedge and report replication residuals
    Hedge(HedgeArgs),
    /// Test the aggregation property across monitoring partitions
    VerifyAp(VerifyApArgs),
    /// Evaluate the invariance PDE residual of a pay-off
    Residual(ResidualArgs),
    /// Estimate the sensitivity of the floating leg to partition refinement
    Delta(DeltaArgs),
    /// Compare the realised floating leg against the fair value
    Premium(PremiumArgs),
    /// Generate a synthetic lognormal option chain CSV
    ChainGen(ChainGenArgs),
}

/// Model flags shared by every simulating or model-pricing subcommand.
#[derive(Args)]
struct ModelArgs {
    /// Price dynamics: gbm, merton or heston [default: gbm]
    #[arg(long, value_name = "NAME")]
    model: Option<String>,

    /// Initial forward level [default: 100]
    #[arg(long, value_name = "LEVEL", allow_negative_numbers = true)]
    f0: Option<f64>,

    /// Lognormal volatility [default: 0.2]
    #[arg(long, value_name = "VOL", allow_negative_numbers = true)]
    sigma: Option<f64>,

    /// Drift of the forward under the simulation measure [default: 0]
    #[arg(long, value_name = "RATE", allow_negative_numbers = true)]
    drift: Option<f64>,

    /// Merton: jump intensity per year [default: 1]
    #[arg(long, value_name = "LAMBDA", allow_negative_numbers = true)]
    jump_intensity: Option<f64>,

    /// Merton: mean log jump size [default: -0.1]
    #[arg(long, value_name = "MEAN", allow_negative_numbers = true)]
    jump_mean: Option<f64>,

    /// Merton: log jump-size standard deviation [default: 0.15]
    #[arg(long, value_name = "SD", allow_negative_numbers = true)]
    jump_sd: Option<f64>,

    /// Heston: mean-reversion speed [default: 2]
    #[arg(long, value_name = "KAPPA", allow_negative_numbers = true)]
    kappa: Option<f64>,

    /// Heston: long-run variance [default: 0.04]
    #[arg(long, value_name = "THETA", allow_negative_numbers = true)]
    theta: Option<f64>,

    /// Heston: volatility of variance [default: 0.3]
    #[arg(long, value_name = "XI", allow_negative_numbers = true)]
    xi: Option<f64>,

    /// Heston: spot-variance correlation [default: -0.7]
    #[arg(long, value_name = "RHO", allow_negative_numbers = true)]
    rho: Option<f64>,

    /// Heston: initial variance [default: 0.04]
    #[arg(long, value_name = "V0", allow_negative_numbers = true)]
    v0: Option<f64>,

    /// Contract maturity in years [default: 1]
    #[arg(long, value_name = "YEARS", allow_negative_numbers = true)]
    maturity: Option<f64>,
}

impl ModelArgs {
    fn build(&self, cfg: &Config) -> Result<(ModelSpec, f64)> {
        let name: String = cfg.resolve(self.model.clone(), "model", "gbm".into())?;
        let f0 = cfg.resolve(self.f0, "f0", 100.0)?;
        let sigma = cfg.resolve(self.sigma, "sigma", 0.2)?;
        let drift = cfg.resolve(self.drift, "drift", 0.0)?;
        let maturity = cfg.resolve(self.maturity, "maturity", 1.0)?;
        if !(maturity > 0.0) || !maturity.is_finite() {
            bail!("maturity must be > 0, got {maturity}");
        }
        let spec = match name.as_str() {
            "gbm" => ModelSpec::gbm(f0, sigma),
            "merton" => ModelSpec::merton(
                f0,
                sigma,
                JumpParams {
                    intensity: cfg.resolve(self.jump_intensity, "jump-intensity", 1.0)?,
                    mean_log_jump: cfg.resolve(self.jump_mean, "jump-mean", -0.1)?,
                    sd_log_jump: cfg.resolve(self.jump_sd, "jump-sd", 0.15)?,
                },
            ),
            "heston" => ModelSpec::heston(
                f0,
                HestonParams {
                    kappa: cfg.resolve(self.kappa, "kappa", 2.0)?,
                    theta: cfg.resolve(self.theta, "theta", 0.04)?,
                    xi: cfg.resolve(self.xi, "xi", 0.3)?,
                    rho: cfg.resolve(self.rho, "rho", -0.7)?,
                    v0: cfg.resolve(self.v0, "v0", 0.04)?,
                },
            ),
            other => bail!("unknown model `{other}`; expected gbm, merton or heston"),
        };
        let spec = spec.with_drift(drift);
        spec.validate()?;
        Ok((spec, maturity))
    }
}

#[derive(Args)]
struct PriceArgs {
    /// Pay-off spec: inline JSON or a path to a JSON file
    #[arg(long, value_name = "SPEC")]
    payoff: Option<String>,

    /// Price from an option-chain CSV (strike,put,call); --f0 and
    /// --maturity supply the chain's forward and expiry
    #[arg(long, value_name = "FILE")]
    chain: Option<PathBuf>,

    #[command(flatten)]
    model: ModelArgs,

    /// Write the JSON report here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HedgeArgs {
    /// Pay-off spec: inline JSON or a path to a JSON file
    #[arg(long, value_name = "SPEC")]
    payoff: Option<String>,

    #[command(flatten)]
    model: ModelArgs,

    /// Monitoring partition: daily, weekly, monthly, a step count, or
    /// irregular:SEED[:N] [default: monthly]
    #[arg(long, value_name = "TOKEN")]
    partition: Option<String>,

    /// Number of simulated paths; 1 keeps the full per-time report [default: 1]
    #[arg(long, value_name = "N")]
    paths: Option<usize>,

    /// RNG seed (required; fixes the simulation exactly)
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Write the JSON report here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Also write a per-time CSV table
    #[arg(long, value_name = "FILE")]
    out_csv: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyApArgs {
    /// Pay-off spec: inline JSON or a path to a JSON file
    #[arg(long, value_name = "SPEC")]
    payoff: Option<String>,

    #[command(flatten)]
    model: ModelArgs,

    /// Comma-separated partition tokens [default: 1,12,52,252]
    #[arg(long, value_name = "TOKENS")]
    partitions: Option<String>,

    /// Number of common Monte Carlo paths [default: 10000]
    #[arg(long, value_name = "N")]
    paths: Option<usize>,

    /// RNG seed (required)
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Paired z-score threshold [default: 4]
    #[arg(long, value_name = "Z")]
    z: Option<f64>,

    /// Write the JSON verdict here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ResidualArgs {
    /// Pay-off spec: inline JSON or a path to a JSON file
    #[arg(long, value_name = "SPEC")]
    payoff: Option<String>,

    /// Number of random evaluation points [default: 64]
    #[arg(long, value_name = "N")]
    points: Option<usize>,

    /// Seed of the evaluation-point cloud [default: 0]
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Use central finite differences instead of the closed form
    #[arg(long)]
    fd: bool,

    /// Finite-difference step (needs --fd) [default: 1e-3]
    #[arg(long, value_name = "H")]
    step: Option<f64>,

    /// Largest acceptable Frobenius norm of the residual [default: 1e-8]
    #[arg(long, value_name = "TOL")]
    tol: Option<f64>,

    /// Write the JSON report here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DeltaArgs {
    /// Pay-off spec: inline JSON or a path to a JSON file
    #[arg(long, value_name = "SPEC")]
    payoff: Option<String>,

    #[command(flatten)]
    model: ModelArgs,

    /// Coarse monitoring partition token [default: monthly]
    #[arg(long, value_name = "TOKEN")]
    partition: Option<String>,

    /// Refinement factor of the fine partition [default: 64]
    #[arg(long, value_name = "K")]
    fine_factor: Option<usize>,

    /// Number of paired Monte Carlo paths [default: 100000]
    #[arg(long, value_name = "N")]
    paths: Option<usize>,

    /// RNG seed (required)
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Write the JSON estimate here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PremiumArgs {
    /// Pay-off spec: inline JSON or a path to a JSON file
    #[arg(long, value_name = "SPEC")]
    payoff: Option<String>,

    #[command(flatten)]
    model: ModelArgs,

    /// Monitoring partition token [default: monthly]
    #[arg(long, value_name = "TOKEN")]
    partition: Option<String>,

    /// Number of Monte Carlo paths [default: 50000]
    #[arg(long, value_name = "N")]
    paths: Option<usize>,

    /// RNG seed (required)
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Write the JSON report here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ChainGenArgs {
    /// Forward level of the chain [default: 100]
    #[arg(long, value_name = "LEVEL", allow_negative_numbers = true)]
    f0: Option<f64>,

    /// Lognormal volatility of the quotes [default: 0.2]
    #[arg(long, value_name = "VOL", allow_negative_numbers = true)]
    sigma: Option<f64>,

    /// Expiry of the chain in years [default: 1]
    #[arg(long, value_name = "YEARS", allow_negative_numbers = true)]
    tau: Option<f64>,

    /// Number of strikes [default: 512]
    #[arg(long, value_name = "N")]
    strikes: Option<usize>,

    /// Log-strike half-width in standard deviations [default: 8]
    #[arg(long, value_name = "W", allow_negative_numbers = true)]
    width: Option<f64>,

    /// Output CSV path
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0u8,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let cfg = Config::load(cli.config.as_deref())?;
    let threads: usize = cfg.resolve(cli.threads, "threads", 0)?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("cannot size the rayon thread pool")?;
    }
    match &cli.command {
        Command::Price(a) => run_price(&cfg, a),
        Command::Hedge(a) => run_hedge(&cfg, a),
        Command::VerifyAp(a) => run_verify_ap(&cfg, a),
        Command::Residual(a) => run_residual(&cfg, a),
        Command::Delta(a) => run_delta(&cfg, a),
        Command::Premium(a) => run_premium(&cfg, a),
        Command::ChainGen(a) => run_chain_gen(&cfg, a),
    }
}

fn require_payoff(cfg: &Config, flag: &Option<String>) -> Result<SwapPayoff> {
    load_payoff(&cfg.require(flag.clone(), "payoff")?)
}

fn require_di(payoff: SwapPayoff, what: &str) -> Result<DiPayoff> {
    match payoff {
        SwapPayoff::Di(p) => Ok(p),
        SwapPayoff::Classic(k) => {
            bail!("{what} is defined for vector-space pay-offs, not the classic `{}`", k.token())
        }
    }
}

fn run_price(cfg: &Config, a: &PriceArgs) -> Result<u8> {
    let payoff = require_payoff(cfg, &a.payoff)?;
    let payoff = match payoff {
        SwapPayoff::Di(p) => p,
        SwapPayoff::Classic(_) => {
            bail!("classic pay-offs have no analytic fair value here; use `diswap premium`")
        }
    };
    let (model, maturity) = a.model.build(cfg)?;
    let state = match &a.chain {
        Some(path) => {
            let chain = OptionChain::read_csv(path, model.f0, maturity)?;
            MarketState::from_chain(&payoff, &chain)?
        }
        None => MarketState::from_model(&payoff, &model, maturity)?,
    };
    let parts = fair_value_parts(&payoff, &state)?;
    let artifact = serde_json::json!({
        "fair_value": parts.total(),
        "components": parts,
    });
    emit(&artifact, a.out.as_deref(), &format!("fair value {:.9}", parts.total()))?;
    Ok(0)
}

fn run_hedge(cfg: &Config, a: &HedgeArgs) -> Result<u8> {
    let payoff = require_di(require_payoff(cfg, &a.payoff)?, "the self-financing hedge")?;
    let (model, maturity) = a.model.build(cfg)?;
    let token: String = cfg.resolve(a.partition.clone(), "partition", "monthly".into())?;
    let partition = Partition::parse(&token, maturity)?;
    let paths: usize = cfg.resolve(a.paths, "paths", 1)?;
    let seed: u64 = cfg.require(a.seed, "seed")?;

    if paths <= 1 {
        let report = hedge_path(&payoff, &model, &partition, seed)?;
        if let Some(csv) = &a.out_csv {
            let rows: Vec<Vec<f64>> = report
                .times
                .iter()
                .zip(&report.value)
                .zip(&report.realised)
                .zip(&report.implied)
                .map(|(((t, v), r), i)| vec![*t, *v, *r, *i])
                .collect();
            let written = write_csv_table(csv, "time,value,realised,implied", &rows)?;
            eprintln!("per-time table -> {}", written.display());
        }
        let summary = format!(
            "hedge[1 path]: max |residual| {:.3e}, terminal gap {:.3e}",
            report.max_abs_residual, report.terminal_gap
        );
        emit(&serde_json::to_value(&report)?, a.out.as_deref(), &summary)?;
    } else {
        let report = hedge_panel(&payoff, &model, &partition, paths, seed)?;
        if let Some(csv) = &a.out_csv {
            let rows: Vec<Vec<f64>> = report
                .times
                .iter()
                .zip(&report.mean_value)
                .zip(&report.mean_realised)
                .zip(&report.mean_implied)
                .zip(&report.max_step_residual)
                .map(|((((t, v), r), i), m)| vec![*t, *v, *r, *i, *m])
                .collect();
            let written = write_csv_table(
                csv,
                "time,mean_value,mean_realised,mean_implied,max_step_residual",
                &rows,
            )?;
            eprintln!("per-time table -> {}", written.display());
        }
        let summary = format!(
            "hedge[{} paths]: max |residual| {:.3e}, max terminal gap {:.3e}",
            paths, report.max_abs_residual, report.max_terminal_gap
        );
        emit(&serde_json::to_value(&report)?, a.out.as_deref(), &summary)?;
    }
    Ok(0)
}

fn run_verify_ap(cfg: &Config, a: &VerifyApArgs) -> Result<u8> {
    let payoff = require_payoff(cfg, &a.payoff)?;
    let (model, maturity) = a.model.build(cfg)?;
    let tokens: String = cfg.resolve(a.partitions.clone(), "partitions", "1,12,52,252".into())?;
    let partitions = parse_partitions(&tokens, maturity)?;
    let paths: usize = cfg.resolve(a.paths, "paths", 10_000)?;
    let seed: u64 = cfg.require(a.seed, "seed")?;
    let z: f64 = cfg.resolve(a.z, "z", 4.0)?;

    let verdict = ap_check(&payoff, &model, &partitions, paths, seed, z)?;
    let summary = format!(
        "AP {}: max |z| {:.2} across {} partitions (threshold {z}), dual residual {:.2e} on {} increments",
        if verdict.pass { "pass" } else { "FAIL" },
        verdict.max_abs_z,
        verdict.partitions.len(),
        verdict.dual_max_err,
        verdict.dual_checked,
    );
    let pass = verdict.pass;
    emit(&serde_json::to_value(&verdict)?, a.out.as_deref(), &summary)?;
    Ok(if pass { 0 } else { 2 })
}

fn run_residual(cfg: &Config, a: &ResidualArgs) -> Result<u8> {
    let payoff = require_di(require_payoff(cfg, &a.payoff)?, "the PDE residual")?;
    let points: usize = cfg.resolve(a.points, "points", 64)?;
    let seed: u64 = cfg.resolve(a.seed, "seed", 0)?;
    let tol: f64 = cfg.resolve(a.tol, "tol", 1e-8)?;
    if a.step.is_some() && !a.fd {
        bail!("--step only applies with --fd");
    }
    let mode = if a.fd {
        DerivMode::FiniteDifference { h: cfg.resolve(a.step, "step", 1e-3)? }
    } else {
        DerivMode::Analytic
    };

    let pts = random_points(payoff.dim(), points, seed);
    let report = pde_residual(&Candidate::Payoff(&payoff), &pts, mode)?;
    let pass = report.max_frobenius <= tol;
    let summary = format!(
        "residual[{}] {}: max Frobenius {:.3e} over {} points (tol {tol:.1e})",
        report.mode,
        if pass { "pass" } else { "FAIL" },
        report.max_frobenius,
        report.n_points,
    );
    emit(&serde_json::to_value(&report)?, a.out.as_deref(), &summary)?;
    Ok(if pass { 0 } else { 2 })
}

fn run_delta(cfg: &Config, a: &DeltaArgs) -> Result<u8> {
    let payoff = require_payoff(cfg, &a.payoff)?;
    let (model, maturity) = a.model.build(cfg)?;
    let token: String = cfg.resolve(a.partition.clone(), "partition", "monthly".into())?;
    let coarse = Partition::parse(&token, maturity)?;
    let fine_factor: usize = cfg.resolve(a.fine_factor, "fine-factor", 64)?;
    let paths: usize = cfg.resolve(a.paths, "paths", 100_000)?;
    let seed: u64 = cfg.require(a.seed, "seed")?;

    let est = delta_n(&payoff, &model, &coarse, fine_factor, paths, seed)?;
    let summary = format!(
        "delta {:.6e} +/- {:.2e} ({} vs {})",
        est.mean, est.se, est.coarse, est.fine
    );
    emit(&serde_json::to_value(&est)?, a.out.as_deref(), &summary)?;
    Ok(0)
}

fn run_premium(cfg: &Config, a: &PremiumArgs) -> Result<u8> {
    let payoff = require_payoff(cfg, &a.payoff)?;
    let (model, maturity) = a.model.build(cfg)?;
    let token: String = cfg.resolve(a.partition.clone(), "partition", "monthly".into())?;
    let partition = Partition::parse(&token, maturity)?;
    let paths: usize = cfg.resolve(a.paths, "paths", 50_000)?;
    let seed: u64 = cfg.require(a.seed, "seed")?;

    let report = premium_study(&payoff, &model, &partition, paths, seed)?;
    let summary = format!(
        "premium {:.6e} +/- {:.2e} (fair {:.6e}, realised {:.6e})",
        report.premium, report.premium_se, report.fair_value, report.realised_mean
    );
    emit(&serde_json::to_value(&report)?, a.out.as_deref(), &summary)?;
    Ok(0)
}

fn run_chain_gen(cfg: &Config, a: &ChainGenArgs) -> Result<u8> {
    let f0 = cfg.resolve(a.f0, "f0", 100.0)?;
    let sigma = cfg.resolve(a.sigma, "sigma", 0.2)?;
    let tau = cfg.resolve(a.tau, "tau", 1.0)?;
    let n_strikes = cfg.resolve(a.strikes, "strikes", 512)?;
    let width = cfg.resolve(a.width, "width", 8.0)?;

    let grid = default_grid(f0, sigma, tau, n_strikes, width)?;
    let chain = OptionChain::from_black76(f0, sigma, tau, grid.strikes())?;
    let path = resolve_out_path(&a.out);

    // Render through the library writer, then land atomically.
    let tmp = tempfile::NamedTempFile::new_in(
        path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(std::path::Path::new(".")),
    )?;
    chain.write_csv(tmp.path())?;
    let bytes = std::fs::read(tmp.path())?;
    write_atomic(&path, &bytes)?;
    println!(
        "wrote {n_strikes}-strike chain (F0 {f0}, sigma {sigma}, T {tau}) -> {}",
        path.display()
    );
    Ok(0)
}
