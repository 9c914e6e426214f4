//! Experiment runner for the off-subspace robustness laboratory.
//!
//! Subcommands: `train`, `attack`, `grad-scan`, `init-sweep`, `reg-sweep`,
//! `pca`, `concentration`, `rotation-check`. Every command accepts
//! `--config FILE` (flat `key = value` lines, `#` comments) with command-line
//! flags taking precedence, writes CSV/JSON artifacts into `--out`, prints a
//! JSON summary to stdout, and exits 0 iff every configured assertion passed.
//! Unknown or malformed config keys exit with code 2; runtime errors and
//! failed assertions exit with code 1. Outputs carry no timestamps, so
//! reruns are byte-identical.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use offmanifold::attacks::{pgd_attack, PgdMode};
use offmanifold::concentration::{lemma_grid, results_to_csv, sweep_lemma, LemmaId};
use offmanifold::data::{self, LabeledDataset};
use offmanifold::experiments::{
    grad_scan, init_sweep, mode_mean_spearman, mode_mean_variation, on_subspace_dataset,
    perturbation_trials, reg_rows_to_csv, reg_sweep, rotation_check, spearman, sweep_rows_to_csv,
    GradScanConfig, InitSweepConfig, RegSweepConfig, RotationCheckConfig,
};
use offmanifold::geometry::Subspace;
use offmanifold::network::TwoLayerNet;
use offmanifold::rng::{child_seed, SeededRng};
use offmanifold::training::{train, BatchSize, TrainConfig};
use offmanifold::Error;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(1),
        Err(RunError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(RunError::Other(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

enum RunError {
    /// Bad config file content (unknown key, unparsable value): exit 2.
    Config(String),
    /// Domain/runtime failure: exit 1.
    Other(Error),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Other(e)
    }
}

#[derive(Parser)]
#[command(
    name = "offmanifold",
    version,
    about = "Two-layer ReLU nets on low-dimensional data: training, off-subspace \
             attacks, and concentration checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a network on an on-subspace dataset; write trace.csv + network.json.
    Train(TrainArgs),
    /// Closed-form universal perturbation trials, or a PGD attack sweep.
    Attack(AttackArgs),
    /// Per-seed off-subspace gradient norms against the two-sided bounds.
    GradScan(GradScanArgs),
    /// Robustness vs initialization scale (PGD distance per divisor/mode).
    InitSweep(InitSweepArgs),
    /// Robustness and weight decay vs L2 regularization strength.
    RegSweep(RegSweepArgs),
    /// Cumulative-variance analysis of a CSV dataset; optional projection.
    Pca(PcaArgs),
    /// Monte Carlo tails for the six Gaussian concentration bounds.
    Concentration(ConcentrationArgs),
    /// Train on data and on a rotated copy; assert the outputs agree.
    RotationCheck(RotationCheckArgs),
}

fn dispatch(cmd: Cmd) -> Result<bool, RunError> {
    match cmd {
        Cmd::Train(a) => run_train(a),
        Cmd::Attack(a) => run_attack(a),
        Cmd::GradScan(a) => run_grad_scan(a),
        Cmd::InitSweep(a) => run_init_sweep(a),
        Cmd::RegSweep(a) => run_reg_sweep(a),
        Cmd::Pca(a) => run_pca(a),
        Cmd::Concentration(a) => run_concentration(a),
        Cmd::RotationCheck(a) => run_rotation_check(a),
    }
}

// ---------------------------------------------------------------------------
// Config-file plumbing
// ---------------------------------------------------------------------------

/// Parse a flat `key = value` file; keys are normalized to kebab-case.
fn load_config(path: &Path) -> Result<Vec<(String, String)>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(format!("line {}: expected key = value, got '{raw}'", i + 1));
        };
        out.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

/// Fill `slot` from a config value unless the command line already set it.
fn set_opt<T: FromStr>(slot: &mut Option<T>, key: &str, val: &str) -> Result<(), String>
where
    T::Err: Display,
{
    if slot.is_none() {
        *slot = Some(
            val.parse::<T>()
                .map_err(|e| format!("invalid value for config key '{key}': {e}"))?,
        );
    }
    Ok(())
}

/// Boolean flags: the command line can only turn them on, so config merges by
/// OR and cannot override an explicit flag.
fn set_flag(slot: &mut bool, key: &str, val: &str) -> Result<(), String> {
    let v: bool = val
        .parse()
        .map_err(|e| format!("invalid value for config key '{key}': {e}"))?;
    *slot = *slot || v;
    Ok(())
}

fn parse_list<T: FromStr>(s: &str, key: &str) -> Result<Vec<T>, String>
where
    T::Err: Display,
{
    let items: Result<Vec<T>, String> = s
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .map_err(|e| format!("invalid value for config key '{key}': {e}"))
        })
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(format!("config key '{key}' needs at least one entry"));
    }
    Ok(items)
}

fn ensure_out_dir(out: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(out).map_err(|e| RunError::Other(Error::from(e)))
}

fn emit(summary: &serde_json::Value) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(summary).expect("json");
    // Tolerate a closed stdout (`offmanifold ... | head`): the exit code,
    // not the summary print, carries the outcome.
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn default_beta(d: usize) -> f64 {
    1.0 / (d as f64).sqrt()
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Args)]
struct TrainArgs {
    /// Flat key = value config file; command-line flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (trace.csv, network.json). Default: out
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ambient dimension. Default: 64
    #[arg(long)]
    d: Option<usize>,
    /// Codimension of the data subspace. Default: 16
    #[arg(long)]
    l: Option<usize>,
    /// Hidden width. Default: 32
    #[arg(long)]
    m: Option<usize>,
    /// Init scale. Default: 1/sqrt(d)
    #[arg(long)]
    beta: Option<f64>,
    /// Learning rate. Default: 0.05
    #[arg(long)]
    eta: Option<f64>,
    /// L2 regularization strength. Default: 0
    #[arg(long)]
    lambda: Option<f64>,
    /// GD steps. Default: 1000
    #[arg(long)]
    steps: Option<usize>,
    /// "full" or a mini-batch size. Default: full
    #[arg(long)]
    batch: Option<String>,
    /// Master seed. Default: 0
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset recipe: random | line7 | grid25 | sphere. Default: random
    #[arg(long)]
    dataset: Option<String>,
    /// Sample count for random / sphere datasets. Default: 20
    #[arg(long)]
    points: Option<usize>,
    /// Norm of random on-subspace points. Default: sqrt(d-l)
    #[arg(long)]
    norm: Option<f64>,
    /// Half-width for line7 / grid25. Default: sqrt(2)
    #[arg(long)]
    extent: Option<f64>,
    /// Intrinsic sphere dimension. Default: 28
    #[arg(long)]
    sphere_dim: Option<usize>,
    /// Sphere radius. Default: 1
    #[arg(long)]
    radius: Option<f64>,
    /// Load the dataset from this CSV instead of generating one.
    #[arg(long)]
    data_csv: Option<PathBuf>,
    /// Load the subspace from this JSON artifact instead of building one.
    #[arg(long)]
    subspace_json: Option<PathBuf>,
    /// Draw a uniformly random subspace instead of the axis-aligned one.
    #[arg(long)]
    random_subspace: bool,
    /// Stop early once the margin reaches this value.
    #[arg(long)]
    target_margin: Option<f64>,
    /// Record every k-th trace row. Default: 1
    #[arg(long)]
    trace_stride: Option<usize>,
    /// Assertion: require the final margin to reach this value.
    #[arg(long)]
    assert_margin: Option<f64>,
}

impl TrainArgs {
    fn merge_config(&mut self) -> Result<(), String> {
        let Some(path) = self.config.clone() else {
            return Ok(());
        };
        for (k, v) in load_config(&path)? {
            match k.as_str() {
                "out" => set_opt(&mut self.out, &k, &v)?,
                "d" => set_opt(&mut self.d, &k, &v)?,
                "l" => set_opt(&mut self.l, &k, &v)?,
                "m" => set_opt(&mut self.m, &k, &v)?,
                "beta" => set_opt(&mut self.beta, &k, &v)?,
                "eta" => set_opt(&mut self.eta, &k, &v)?,
                "lambda" => set_opt(&mut self.lambda, &k, &v)?,
                "steps" => set_opt(&mut self.steps, &k, &v)?,
                "batch" => set_opt(&mut self.batch, &k, &v)?,
                "seed" => set_opt(&mut self.seed, &k, &v)?,
                "dataset" => set_opt(&mut self.dataset, &k, &v)?,
                "points" => set_opt(&mut self.points, &k, &v)?,
                "norm" => set_opt(&mut self.norm, &k, &v)?,
                "extent" => set_opt(&mut self.extent, &k, &v)?,
                "sphere-dim" => set_opt(&mut self.sphere_dim, &k, &v)?,
                "radius" => set_opt(&mut self.radius, &k, &v)?,
                "data-csv" => set_opt(&mut self.data_csv, &k, &v)?,
                "subspace-json" => set_opt(&mut self.subspace_json, &k, &v)?,
                "random-subspace" => set_flag(&mut self.random_subspace, &k, &v)?,
                "target-margin" => set_opt(&mut self.target_margin, &k, &v)?,
                "trace-stride" => set_opt(&mut self.trace_stride, &k, &v)?,
                "assert-margin" => set_opt(&mut self.assert_margin, &k, &v)?,
                other => return Err(format!("unknown config key '{other}'")),
            }
        }
        Ok(())
    }
}

fn parse_batch(s: &str) -> Result<BatchSize, String> {
    if s == "full" {
        return Ok(BatchSize::Full);
    }
    s.parse::<usize>()
        .map(BatchSize::Size)
        .map_err(|_| format!("invalid value for config key 'batch': expected \"full\" or an integer, got '{s}'"))
}

fn run_train(mut a: TrainArgs) -> Result<bool, RunError> {
    a.merge_config().map_err(RunError::Config)?;
    let loaded_subspace = match &a.subspace_json {
        Some(p) => Some(Subspace::read_json(p)?),
        None => None,
    };
    let loaded_data = match &a.data_csv {
        Some(p) => Some(LabeledDataset::read_csv(p)?),
        None => None,
    };
    // Loaded artifacts pin any dimension not set explicitly, so a `pca`
    // output chains straight into `train` without repeating --d/--l.
    let d = a
        .d
        .or_else(|| loaded_data.as_ref().map(|ds| ds.d()))
        .or_else(|| loaded_subspace.as_ref().map(|s| s.d()))
        .unwrap_or(64);
    let l = a
        .l
        .or_else(|| loaded_subspace.as_ref().map(|s| s.l()))
        .unwrap_or(16);
    if let Some(s) = &loaded_subspace {
        if s.d() != d {
            return Err(RunError::Config(format!(
                "invalid value for config key 'd': {d} conflicts with subspace-json dimension {}",
                s.d()
            )));
        }
        if s.l() != l {
            return Err(RunError::Config(format!(
                "invalid value for config key 'l': {l} conflicts with subspace-json codimension {}",
                s.l()
            )));
        }
    }
    if let Some(ds) = &loaded_data {
        if ds.d() != d {
            return Err(RunError::Config(format!(
                "invalid value for config key 'd': {d} conflicts with data-csv dimension {}",
                ds.d()
            )));
        }
    }
    let m = a.m.unwrap_or(32);
    let beta = a.beta.unwrap_or_else(|| default_beta(d));
    let seed = a.seed.unwrap_or(0);
    let out = a.out.unwrap_or_else(|| PathBuf::from("out"));
    let batch = parse_batch(a.batch.as_deref().unwrap_or("full")).map_err(RunError::Config)?;
    let kind = a.dataset.as_deref().unwrap_or("random");

    let mut rng = SeededRng::new(child_seed(seed, "cli-train", 0));
    let subspace = match loaded_subspace {
        Some(s) => s,
        None if a.random_subspace => Subspace::random(d, l, &mut rng)?,
        None => Subspace::axis(d, l)?,
    };
    let dataset = if let Some(ds) = loaded_data {
        ds
    } else {
        let points = a.points.unwrap_or(20);
        match kind {
            "random" => on_subspace_dataset(
                &subspace,
                points,
                a.norm.unwrap_or_else(|| ((d - l) as f64).sqrt()),
                &mut rng,
            )?,
            "line7" => data::line7(&subspace, a.extent.unwrap_or(std::f64::consts::SQRT_2))?,
            "grid25" => data::grid25(&subspace, a.extent.unwrap_or(std::f64::consts::SQRT_2))?,
            "sphere" => data::sphere_shell(
                &subspace,
                a.sphere_dim.unwrap_or(28),
                a.radius.unwrap_or(1.0),
                points,
                &mut rng,
            )?,
            other => {
                return Err(RunError::Config(format!(
                    "invalid value for config key 'dataset': unknown recipe '{other}'"
                )))
            }
        }
    };
    let net = TwoLayerNet::init(d, m, beta, &mut rng)?;
    let cfg = TrainConfig {
        eta: a.eta.unwrap_or(0.05),
        lambda: a.lambda.unwrap_or(0.0),
        max_steps: a.steps.unwrap_or(1000),
        target_margin: a.target_margin,
        batch_size: batch,
        seed,
        trace_stride: a.trace_stride.unwrap_or(1),
        ..TrainConfig::default()
    };
    let (trained, trace) = train(net, &dataset, &subspace, &cfg)?;

    ensure_out_dir(&out)?;
    trace.write_csv(&out.join("trace.csv"))?;
    trained.write_json(&out.join("network.json"))?;

    let last = trace.last().expect("trace has at least one row");
    let margin_ok = a.assert_margin.map_or(true, |g| last.margin >= g);
    if !margin_ok {
        eprintln!(
            "assertion failed: final margin {} < required {}",
            last.margin,
            a.assert_margin.unwrap()
        );
    }
    emit(&json!({
        "command": "train",
        "d": d, "l": l, "m": m, "beta": beta,
        "dataset": kind,
        "steps": last.step,
        "final_loss": last.loss,
        "final_margin": last.margin,
        "max_freeze_residual": trace.max_freeze_residual(),
        "passed": margin_ok,
    }));
    Ok(margin_ok)
}

// ---------------------------------------------------------------------------
// attack
// ---------------------------------------------------------------------------

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (attack.json). Default: out
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ambient dimension. Default: 1024
    #[arg(long)]
    d: Option<usize>,
    /// Codimension of the data subspace. Default: 960
    #[arg(long)]
    l: Option<usize>,
    /// Hidden width. Default: 8
    #[arg(long)]
    m: Option<usize>,
    /// Init scale. Default: 1/sqrt(d)
    #[arg(long)]
    beta: Option<f64>,
    /// Master seed. Default: 0
    #[arg(long)]
    seed: Option<u64>,
    /// Number of trials (fresh net + point each). Default: 50
    #[arg(long)]
    trials: Option<usize>,
    /// Norm of the on-subspace attack point. Default: sqrt(d)
    #[arg(long)]
    x0_norm: Option<f64>,
    /// closed-form | pgd. Default: closed-form
    #[arg(long)]
    method: Option<String>,
    /// PGD projection mode: unprojected | onto-p | onto-p-perp. Default: unprojected
    #[arg(long)]
    mode: Option<String>,
    /// PGD step = x0_norm / step-divisor. Default: 1000
    #[arg(long)]
    step_divisor: Option<f64>,
    /// PGD iteration budget. Default: 10000
    #[arg(long)]
    max_iters: Option<usize>,
    /// Assertion: require at least this flip fraction.
    #[arg(long)]
    min_flip_frac: Option<f64>,
}

impl AttackArgs {
    fn merge_config(&mut self) -> Result<(), String> {
        let Some(path) = self.config.clone() else {
            return Ok(());
        };
        for (k, v) in load_config(&path)? {
            match k.as_str() {
                "out" => set_opt(&mut self.out, &k, &v)?,
                "d" => set_opt(&mut self.d, &k, &v)?,
                "l" => set_opt(&mut self.l, &k, &v)?,
                "m" => set_opt(&mut self.m, &k, &v)?,
                "beta" => set_opt(&mut self.beta, &k, &v)?,
                "seed" => set_opt(&mut self.seed, &k, &v)?,
                "trials" => set_opt(&mut self.trials, &k, &v)?,
                "x0-norm" => set_opt(&mut self.x0_norm, &k, &v)?,
                "method" => set_opt(&mut self.method, &k, &v)?,
                "mode" => set_opt(&mut self.mode, &k, &v)?,
                "step-divisor" => set_opt(&mut self.step_divisor, &k, &v)?,
                "max-iters" => set_opt(&mut self.max_iters, &k, &v)?,
                "min-flip-frac" => set_opt(&mut self.min_flip_frac, &k, &v)?,
                other => return Err(format!("unknown config key '{other}'")),
            }
        }
        Ok(())
    }
}

fn run_attack(mut a: AttackArgs) -> Result<bool, RunError> {
    a.merge_config().map_err(RunError::Config)?;
    let d = a.d.unwrap_or(1024);
    let l = a.l.unwrap_or(960);
    let m = a.m.unwrap_or(8);
    let beta = a.beta.unwrap_or_else(|| default_beta(d));
    let seed = a.seed.unwrap_or(0);
    let trials = a.trials.unwrap_or(50);
    let x0_norm = a.x0_norm.unwrap_or_else(|| (d as f64).sqrt());
    let out = a.out.unwrap_or_else(|| PathBuf::from("out"));
    let method = a.method.as_deref().unwrap_or("closed-form");

    let summary = match method {
        "closed-form" => {
            let stats = perturbation_trials(d, l, m, beta, x0_norm, trials, seed)?;
            let flip_frac = stats.sign_flips as f64 / stats.valid as f64;
            let frac_ok = a.min_flip_frac.map_or(true, |f| flip_frac >= f);
            let bound_ok = stats.bound_violations_in_flipped == 0;
            if !frac_ok {
                eprintln!(
                    "assertion failed: flip fraction {flip_frac} < required {}",
                    a.min_flip_frac.unwrap()
                );
            }
            if !bound_ok {
                eprintln!(
                    "assertion failed: {} flipped trials exceeded the norm bound",
                    stats.bound_violations_in_flipped
                );
            }
            json!({
                "command": "attack",
                "method": "closed-form",
                "d": d, "l": l, "m": m, "beta": beta,
                "valid": stats.valid,
                "sign_flips": stats.sign_flips,
                "strong_flips": stats.strong_flips,
                "bound_violations_in_flipped": stats.bound_violations_in_flipped,
                "degenerate_draws": stats.degenerate_draws,
                "condition_met": stats.condition_met,
                "failure_prob": stats.failure_prob,
                "passed": frac_ok && bound_ok,
            })
        }
        "pgd" => {
            let mode: PgdMode = a
                .mode
                .as_deref()
                .unwrap_or("unprojected")
                .parse()
                .map_err(|e: Error| RunError::Config(format!(
                    "invalid value for config key 'mode': {e}"
                )))?;
            let step = x0_norm / a.step_divisor.unwrap_or(1000.0);
            let max_iters = a.max_iters.unwrap_or(10_000);
            let subspace = Subspace::axis(d, l)?;
            let mut flips = 0usize;
            let mut norms = Vec::with_capacity(trials);
            for i in 0..trials as u64 {
                let mut rng = SeededRng::new(child_seed(seed, "cli-pgd", i));
                let net = TwoLayerNet::init(d, m, beta, &mut rng)?;
                let x0 = subspace.sample_on_p(x0_norm, &mut rng)?;
                let y0 = if net.forward(x0.view())? >= 0.0 { 1.0 } else { -1.0 };
                let res = pgd_attack(&net, &subspace, x0.view(), y0, mode, step, max_iters)?;
                if res.flipped {
                    flips += 1;
                }
                norms.push(res.moved_norm);
            }
            let n = norms.len().max(1) as f64;
            let mean = norms.iter().sum::<f64>() / n;
            let std =
                (norms.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
            let flip_frac = flips as f64 / trials.max(1) as f64;
            let frac_ok = a.min_flip_frac.map_or(true, |f| flip_frac >= f);
            if !frac_ok {
                eprintln!(
                    "assertion failed: flip fraction {flip_frac} < required {}",
                    a.min_flip_frac.unwrap()
                );
            }
            json!({
                "command": "attack",
                "method": "pgd",
                "mode": mode.name(),
                "d": d, "l": l, "m": m, "beta": beta,
                "trials": trials,
                "flips": flips,
                "mean_norm": mean,
                "std_norm": std,
                "passed": frac_ok,
            })
        }
        other => {
            return Err(RunError::Config(format!(
                "invalid value for config key 'method': expected closed-form | pgd, got '{other}'"
            )))
        }
    };
    ensure_out_dir(&out)?;
    std::fs::write(
        out.join("attack.json"),
        serde_json::to_string_pretty(&summary).expect("json"),
    )
    .map_err(Error::from)?;
    emit(&summary);
    Ok(summary["passed"].as_bool().unwrap_or(false))
}

// ---------------------------------------------------------------------------
// grad-scan
// ---------------------------------------------------------------------------

#[derive(Args)]
struct GradScanArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (grad_scan.csv, grad_scan.json). Default: out
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ambient dimension. Default: 256
    #[arg(long)]
    d: Option<usize>,
    /// Codimension. Default: 128
    #[arg(long)]
    l: Option<usize>,
    /// Hidden width. Default: 128
    #[arg(long)]
    m: Option<usize>,
    /// Init scale. Default: 1/sqrt(d)
    #[arg(long)]
    beta: Option<f64>,
    /// Seeds (one row each). Default: 100
    #[arg(long)]
    seeds: Option<usize>,
    /// Master seed. Default: 0
    #[arg(long)]
    seed: Option<u64>,
    /// Norm of the probe point. Default: sqrt(d-l)
    #[arg(long)]
    x0_norm: Option<f64>,
    /// GD steps before measuring. Default: 0
    #[arg(long)]
    train_steps: Option<usize>,
    /// Learning rate when train-steps > 0. Default: 0.05
    #[arg(long)]
    eta: Option<f64>,
    /// Training points when train-steps > 0. Default: 10
    #[arg(long)]
    train_points: Option<usize>,
    /// Assertion: require at least this many seeds inside the sandwich.
    #[arg(long)]
    min_pass: Option<usize>,
}

impl GradScanArgs {
    fn merge_config(&mut self) -> Result<(), String> {
        let Some(path) = self.config.clone() else {
            return Ok(());
        };
        for (k, v) in load_config(&path)? {
            match k.as_str() {
                "out" => set_opt(&mut self.out, &k, &v)?,
                "d" => set_opt(&mut self.d, &k, &v)?,
                "l" => set_opt(&mut self.l, &k, &v)?,
                "m" => set_opt(&mut self.m, &k, &v)?,
                "beta" => set_opt(&mut self.beta, &k, &v)?,
                "seeds" => set_opt(&mut self.seeds, &k, &v)?,
                "seed" => set_opt(&mut self.seed, &k, &v)?,
                "x0-norm" => set_opt(&mut self.x0_norm, &k, &v)?,
                "train-steps" => set_opt(&mut self.train_steps, &k, &v)?,
                "eta" => set_opt(&mut self.eta, &k, &v)?,
                "train-points" => set_opt(&mut self.train_points, &k, &v)?,
                "min-pass" => set_opt(&mut self.min_pass, &k, &v)?,
                other => return Err(format!("unknown config key '{other}'")),
            }
        }
        Ok(())
    }
}

fn run_grad_scan(mut a: GradScanArgs) -> Result<bool, RunError> {
    a.merge_config().map_err(RunError::Config)?;
    let d = a.d.unwrap_or(256);
    let l = a.l.unwrap_or(128);
    let m = a.m.unwrap_or(128);
    let mut cfg = GradScanConfig::new(d, l, m);
    if let Some(b) = a.beta {
        cfg.beta = b;
    }
    cfg.seeds = a.seeds.unwrap_or(100);
    cfg.base_seed = a.seed.unwrap_or(0);
    if let Some(x) = a.x0_norm {
        cfg.x0_norm = x;
    }
    cfg.train_steps = a.train_steps.unwrap_or(0);
    cfg.train_eta = a.eta.unwrap_or(0.05);
    cfg.train_points = a.train_points.unwrap_or(10);
    let out = a.out.unwrap_or_else(|| PathBuf::from("out"));

    let result = grad_scan(&cfg)?;
    ensure_out_dir(&out)?;
    std::fs::write(out.join("grad_scan.csv"), result.to_csv_string()).map_err(Error::from)?;

    let passed = a.min_pass.map_or(true, |k| result.sandwich_pass_count >= k);
    if !passed {
        eprintln!(
            "assertion failed: {} of {} seeds inside the sandwich, required {}",
            result.sandwich_pass_count,
            cfg.seeds,
            a.min_pass.unwrap()
        );
    }
    let summary = json!({
        "command": "grad-scan",
        "d": d, "l": l, "m": m, "beta": cfg.beta,
        "seeds": cfg.seeds,
        "train_steps": cfg.train_steps,
        "sandwich_pass_count": result.sandwich_pass_count,
        "passed": passed,
    });
    std::fs::write(
        out.join("grad_scan.json"),
        serde_json::to_string_pretty(&summary).expect("json"),
    )
    .map_err(Error::from)?;
    emit(&summary);
    Ok(passed)
}

// ---------------------------------------------------------------------------
// init-sweep
// ---------------------------------------------------------------------------

#[derive(Args)]
struct InitSweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (init_sweep.csv, init_sweep.json). Default: out
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ambient dimension. Default: 784
    #[arg(long)]
    d: Option<usize>,
    /// Intrinsic sphere dimension. Default: 28
    #[arg(long)]
    sphere_dim: Option<usize>,
    /// Hidden width. Default: 64
    #[arg(long)]
    m: Option<usize>,
    /// Init scale before division. Default: 1/sqrt(d)
    #[arg(long)]
    base_beta: Option<f64>,
    /// Comma list of init divisors. Default: 1,2,4,8,16
    #[arg(long)]
    divisors: Option<String>,
    /// Comma list of attack modes. Default: unprojected,onto-p,onto-p-perp
    #[arg(long)]
    modes: Option<String>,
    /// Sphere radius. Default: 1
    #[arg(long)]
    radius: Option<f64>,
    /// Training points. Default: 60
    #[arg(long)]
    train_points: Option<usize>,
    /// Attack points per cell. Default: 200
    #[arg(long)]
    attack_points: Option<usize>,
    /// GD steps per cell. Default: 600
    #[arg(long)]
    steps: Option<usize>,
    /// Learning rate. Default: 0.05
    #[arg(long)]
    eta: Option<f64>,
    /// PGD step = radius / step-divisor. Default: 100
    #[arg(long)]
    step_divisor: Option<f64>,
    /// PGD iteration budget. Default: 4000
    #[arg(long)]
    pgd_max_iters: Option<usize>,
    /// Master seed. Default: 0
    #[arg(long)]
    seed: Option<u64>,
    /// Assert the robustness trends (see min-spearman / max-variation).
    #[arg(long)]
    assert_trend: bool,
    /// Required divisor↗distance rank correlation for onto-p-perp. Default: 0.8
    #[arg(long)]
    min_spearman: Option<f64>,
    /// Allowed relative spread of onto-p distances. Default: 0.25
    #[arg(long)]
    max_variation: Option<f64>,
}

impl InitSweepArgs {
    fn merge_config(&mut self) -> Result<(), String> {
        let Some(path) = self.config.clone() else {
            return Ok(());
        };
        for (k, v) in load_config(&path)? {
            match k.as_str() {
                "out" => set_opt(&mut self.out, &k, &v)?,
                "d" => set_opt(&mut self.d, &k, &v)?,
                "sphere-dim" => set_opt(&mut self.sphere_dim, &k, &v)?,
                "m" => set_opt(&mut self.m, &k, &v)?,
                "base-beta" => set_opt(&mut self.base_beta, &k, &v)?,
                "divisors" => set_opt(&mut self.divisors, &k, &v)?,
                "modes" => set_opt(&mut self.modes, &k, &v)?,
                "radius" => set_opt(&mut self.radius, &k, &v)?,
                "train-points" => set_opt(&mut self.train_points, &k, &v)?,
                "attack-points" => set_opt(&mut self.attack_points, &k, &v)?,
                "steps" => set_opt(&mut self.steps, &k, &v)?,
                "eta" => set_opt(&mut self.eta, &k, &v)?,
                "step-divisor" => set_opt(&mut self.step_divisor, &k, &v)?,
                "pgd-max-iters" => set_opt(&mut self.pgd_max_iters, &k, &v)?,
                "seed" => set_opt(&mut self.seed, &k, &v)?,
                "assert-trend" => set_flag(&mut self.assert_trend, &k, &v)?,
                "min-spearman" => set_opt(&mut self.min_spearman, &k, &v)?,
                "max-variation" => set_opt(&mut self.max_variation, &k, &v)?,
                other => return Err(format!("unknown config key '{other}'")),
            }
        }
        Ok(())
    }
}

fn run_init_sweep(mut a: InitSweepArgs) -> Result<bool, RunError> {
    a.merge_config().map_err(RunError::Config)?;
    let d = a.d.unwrap_or(784);
    let sphere_dim = a.sphere_dim.unwrap_or(28);
    let m = a.m.unwrap_or(64);
    let mut cfg = InitSweepConfig::new(d, sphere_dim, m);
    if let Some(b) = a.base_beta {
        cfg.base_beta = b;
    }
    if let Some(s) = &a.divisors {
        cfg.divisors = parse_list(s, "divisors").map_err(RunError::Config)?;
    }
    if let Some(s) = &a.modes {
        cfg.modes = parse_list(s, "modes").map_err(RunError::Config)?;
    }
    if let Some(r) = a.radius {
        cfg.radius = r;
    }
    if let Some(v) = a.train_points {
        cfg.train_points = v;
    }
    if let Some(v) = a.attack_points {
        cfg.attack_points = v;
    }
    if let Some(v) = a.steps {
        cfg.steps = v;
    }
    if let Some(v) = a.eta {
        cfg.eta = v;
    }
    if let Some(v) = a.step_divisor {
        cfg.step_divisor = v;
    }
    if let Some(v) = a.pgd_max_iters {
        cfg.pgd_max_iters = v;
    }
    cfg.seed = a.seed.unwrap_or(0);
    let out = a.out.unwrap_or_else(|| PathBuf::from("out"));

    let rows = init_sweep(&cfg)?;
    ensure_out_dir(&out)?;
    std::fs::write(out.join("init_sweep.csv"), sweep_rows_to_csv(&rows)).map_err(Error::from)?;

    let sp = mode_mean_spearman(&rows, PgdMode::OntoPerp);
    let var = mode_mean_variation(&rows, PgdMode::OntoP);
    let mut passed = true;
    if a.assert_trend {
        let min_sp = a.min_spearman.unwrap_or(0.8);
        let max_var = a.max_variation.unwrap_or(0.25);
        if cfg.modes.contains(&PgdMode::OntoPerp) {
            match sp {
                Some(s) if s >= min_sp => {}
                other => {
                    passed = false;
                    eprintln!(
                        "assertion failed: onto-p-perp spearman {other:?} below required {min_sp}"
                    );
                }
            }
        }
        if cfg.modes.contains(&PgdMode::OntoP) {
            match var {
                Some(v) if v < max_var => {}
                other => {
                    passed = false;
                    eprintln!(
                        "assertion failed: onto-p variation {other:?} not under {max_var}"
                    );
                }
            }
        }
    }
    let summary = json!({
        "command": "init-sweep",
        "d": d, "sphere_dim": sphere_dim, "m": m,
        "divisors": cfg.divisors,
        "modes": cfg.modes.iter().map(|md| md.name()).collect::<Vec<_>>(),
        "spearman_onto_p_perp": sp,
        "variation_onto_p": var,
        "passed": passed,
    });
    std::fs::write(
        out.join("init_sweep.json"),
        serde_json::to_string_pretty(&summary).expect("json"),
    )
    .map_err(Error::from)?;
    emit(&summary);
    Ok(passed)
}

// ---------------------------------------------------------------------------
// reg-sweep
// ---------------------------------------------------------------------------

#[derive(Args)]
struct RegSweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (reg_sweep.csv, reg_sweep.json). Default: out
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ambient dimension. Default: 64
    #[arg(long)]
    d: Option<usize>,
    /// Intrinsic sphere dimension. Default: 8
    #[arg(long)]
    sphere_dim: Option<usize>,
    /// Hidden width. Default: 32
    #[arg(long)]
    m: Option<usize>,
    /// Init scale. Default: 1/sqrt(d)
    #[arg(long)]
    beta: Option<f64>,
    /// Comma list of L2 strengths. Default: 0,0.005,0.01,0.02,0.04
    #[arg(long)]
    lambdas: Option<String>,
    /// Sphere radius. Default: 1
    #[arg(long)]
    radius: Option<f64>,
    /// Training points. Default: 30
    #[arg(long)]
    train_points: Option<usize>,
    /// Attack points per cell. Default: 50
    #[arg(long)]
    attack_points: Option<usize>,
    /// GD steps per cell. Default: 400
    #[arg(long)]
    steps: Option<usize>,
    /// Learning rate. Default: 0.05
    #[arg(long)]
    eta: Option<f64>,
    /// PGD step = radius / step-divisor. Default: 500
    #[arg(long)]
    step_divisor: Option<f64>,
    /// PGD iteration budget. Default: 20000
    #[arg(long)]
    pgd_max_iters: Option<usize>,
    /// Master seed. Default: 0
    #[arg(long)]
    seed: Option<u64>,
    /// Additionally assert λ↗distance rank correlation ≥ min-spearman.
    #[arg(long)]
    assert_trend: bool,
    /// Required rank correlation for the trend assertion. Default: 0.8
    #[arg(long)]
    min_spearman: Option<f64>,
}

impl RegSweepArgs {
    fn merge_config(&mut self) -> Result<(), String> {
        let Some(path) = self.config.clone() else {
            return Ok(());
        };
        for (k, v) in load_config(&path)? {
            match k.as_str() {
                "out" => set_opt(&mut self.out, &k, &v)?,
                "d" => set_opt(&mut self.d, &k, &v)?,
                "sphere-dim" => set_opt(&mut self.sphere_dim, &k, &v)?,
                "m" => set_opt(&mut self.m, &k, &v)?,
                "beta" => set_opt(&mut self.beta, &k, &v)?,
                "lambdas" => set_opt(&mut self.lambdas, &k, &v)?,
                "radius" => set_opt(&mut self.radius, &k, &v)?,
                "train-points" => set_opt(&mut self.train_points, &k, &v)?,
                "attack-points" => set_opt(&mut self.attack_points, &k, &v)?,
                "steps" => set_opt(&mut self.steps, &k, &v)?,
                "eta" => set_opt(&mut self.eta, &k, &v)?,
                "step-divisor" => set_opt(&mut self.step_divisor, &k, &v)?,
                "pgd-max-iters" => set_opt(&mut self.pgd_max_iters, &k, &v)?,
                "seed" => set_opt(&mut self.seed, &k, &v)?,
                "assert-trend" => set_flag(&mut self.assert_trend, &k, &v)?,
                "min-spearman" => set_opt(&mut self.min_spearman, &k, &v)?,
                other => return Err(format!("unknown config key '{other}'")),
            }
        }
        Ok(())
    }
}

fn run_reg_sweep(mut a: RegSweepArgs) -> Result<bool, RunError> {
    a.merge_config().map_err(RunError::Config)?;
    let d = a.d.unwrap_or(64);
    let sphere_dim = a.sphere_dim.unwrap_or(8);
    let m = a.m.unwrap_or(32);
    let mut cfg = RegSweepConfig::new(d, sphere_dim, m);
    if let Some(b) = a.beta {
        cfg.beta = b;
    }
    if let Some(s) = &a.lambdas {
        cfg.lambdas = parse_list(s, "lambdas").map_err(RunError::Config)?;
    }
    if let Some(r) = a.radius {
        cfg.radius = r;
    }
    if let Some(v) = a.train_points {
        cfg.train_points = v;
    }
    if let Some(v) = a.attack_points {
        cfg.attack_points = v;
    }
    if let Some(v) = a.steps {
        cfg.steps = v;
    }
    if let Some(v) = a.eta {
        cfg.eta = v;
    }
    if let Some(v) = a.step_divisor {
        cfg.step_divisor = v;
    }
    if let Some(v) = a.pgd_max_iters {
        cfg.pgd_max_iters = v;
    }
    cfg.seed = a.seed.unwrap_or(0);
    let out = a.out.unwrap_or_else(|| PathBuf::from("out"));

    let rows = reg_sweep(&cfg)?;
    ensure_out_dir(&out)?;
    std::fs::write(out.join("reg_sweep.csv"), reg_rows_to_csv(&rows)).map_err(Error::from)?;

    // The decay law is always asserted: it is exact algebra, not a trend.
    let mut passed = true;
    for r in &rows {
        if !r.decay_ok {
            passed = false;
            eprintln!(
                "assertion failed: λ = {} decay ratio off by {} relative",
                r.lambda, r.decay_rel_err
            );
        }
    }
    let sp = if rows.len() >= 2 && rows.iter().all(|r| r.mean_norm.is_finite()) {
        let xs: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.mean_norm).collect();
        spearman(&xs, &ys).ok()
    } else {
        None
    };
    if a.assert_trend {
        let min_sp = a.min_spearman.unwrap_or(0.8);
        match sp {
            Some(s) if s >= min_sp => {}
            other => {
                passed = false;
                eprintln!("assertion failed: λ spearman {other:?} below required {min_sp}");
            }
        }
    }
    let summary = json!({
        "command": "reg-sweep",
        "d": d, "sphere_dim": sphere_dim, "m": m,
        "lambdas": cfg.lambdas,
        "eta": cfg.eta,
        "steps": cfg.steps,
        "spearman_lambda": sp,
        "max_decay_rel_err": rows.iter().map(|r| r.decay_rel_err).fold(0.0, f64::max),
        "passed": passed,
    });
    std::fs::write(
        out.join("reg_sweep.json"),
        serde_json::to_string_pretty(&summary).expect("json"),
    )
    .map_err(Error::from)?;
    emit(&summary);
    Ok(passed)
}

// ---------------------------------------------------------------------------
// pca
// ---------------------------------------------------------------------------

#[derive(Args)]
struct PcaArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (pca.json, optionally projected.csv + subspace.json).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Input dataset CSV (features + final "label" column). Required.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Subtract column means before the analysis.
    #[arg(long)]
    center: bool,
    /// Project onto the top-k components and write projected.csv.
    #[arg(long)]
    components: Option<usize>,
    /// Assertion: components needed for 90% variance must equal this ± tol-90.
    #[arg(long)]
    expect_90: Option<usize>,
    /// Tolerance for expect-90. Default: 0
    #[arg(long)]
    tol_90: Option<usize>,
    /// Assertion: components needed for 95% variance must equal this ± tol-95.
    #[arg(long)]
    expect_95: Option<usize>,
    /// Tolerance for expect-95. Default: 0
    #[arg(long)]
    tol_95: Option<usize>,
}

impl PcaArgs {
    fn merge_config(&mut self) -> Result<(), String> {
        let Some(path) = self.config.clone() else {
            return Ok(());
        };
        for (k, v) in load_config(&path)? {
            match k.as_str() {
                "out" => set_opt(&mut self.out, &k, &v)?,
                "input" => set_opt(&mut self.input, &k, &v)?,
                "center" => set_flag(&mut self.center, &k, &v)?,
                "components" => set_opt(&mut self.components, &k, &v)?,
                "expect-90" => set_opt(&mut self.expect_90, &k, &v)?,
                "tol-90" => set_opt(&mut self.tol_90, &k, &v)?,
                "expect-95" => set_opt(&mut self.expect_95, &k, &v)?,
                "tol-95" => set_opt(&mut self.tol_95, &k, &v)?,
                other => return Err(format!("unknown config key '{other}'")),
            }
        }
        Ok(())
    }
}

fn within(needed: usize, expect: usize, tol: usize) -> bool {
    needed.abs_diff(expect) <= tol
}

fn run_pca(mut a: PcaArgs) -> Result<bool, RunError> {
    a.merge_config().map_err(RunError::Config)?;
    let input = a
        .input
        .clone()
        .ok_or_else(|| RunError::Config("missing required key 'input'".into()))?;
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("out"));

    let dataset = LabeledDataset::read_csv(&input)?;
    let result = data::pca(dataset.points(), a.center)?;
    let needed_90 = result.components_needed(0.90)?;
    let needed_95 = result.components_needed(0.95)?;

    ensure_out_dir(&out)?;
    if let Some(k) = a.components {
        let projected = data::project_dataset(&dataset, &result, k)?;
        projected.write_csv(&out.join("projected.csv"))?;
        if k < dataset.d() {
            result.subspace(k)?.write_json(&out.join("subspace.json"))?;
        }
    }

    let mut passed = true;
    if let Some(e) = a.expect_90 {
        if !within(needed_90, e, a.tol_90.unwrap_or(0)) {
            passed = false;
            eprintln!(
                "assertion failed: 90% variance needs {needed_90} components, expected {e} ± {}",
                a.tol_90.unwrap_or(0)
            );
        }
    }
    if let Some(e) = a.expect_95 {
        if !within(needed_95, e, a.tol_95.unwrap_or(0)) {
            passed = false;
            eprintln!(
                "assertion failed: 95% variance needs {needed_95} components, expected {e} ± {}",
                a.tol_95.unwrap_or(0)
            );
        }
    }
    let summary = json!({
        "command": "pca",
        "input": input.display().to_string(),
        "r": dataset.len(),
        "d": dataset.d(),
        "center": a.center,
        "needed_90": needed_90,
        "needed_95": needed_95,
        "passed": passed,
    });
    std::fs::write(
        out.join("pca.json"),
        serde_json::to_string_pretty(&summary).expect("json"),
    )
    .map_err(Error::from)?;
    emit(&summary);
    Ok(passed)
}

// ---------------------------------------------------------------------------
// concentration
// ---------------------------------------------------------------------------

#[derive(Args)]
struct ConcentrationArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (concentration.csv, concentration.json). Default: out
    #[arg(long)]
    out: Option<PathBuf>,
    /// One lemma name, or "all". Default: all
    #[arg(long)]
    lemma: Option<String>,
    /// Comma list of dimensions n. Default: 16,64,256
    #[arg(long)]
    n_grid: Option<String>,
    /// Comma list of summand counts m. Default: 1,8,32
    #[arg(long)]
    m_grid: Option<String>,
    /// Comma list of thresholds t. Default: 1,2,4
    #[arg(long)]
    t_grid: Option<String>,
    /// Comma list of scales σ. Default: 0.1,1
    #[arg(long)]
    sigma_grid: Option<String>,
    /// Monte Carlo trials per cell. Default: 20000
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed. Default: 0
    #[arg(long)]
    seed: Option<u64>,
}

impl ConcentrationArgs {
    fn merge_config(&mut self) -> Result<(), String> {
        let Some(path) = self.config.clone() else {
            return Ok(());
        };
        for (k, v) in load_config(&path)? {
            match k.as_str() {
                "out" => set_opt(&mut self.out, &k, &v)?,
                "lemma" => set_opt(&mut self.lemma, &k, &v)?,
                "n-grid" => set_opt(&mut self.n_grid, &k, &v)?,
                "m-grid" => set_opt(&mut self.m_grid, &k, &v)?,
                "t-grid" => set_opt(&mut self.t_grid, &k, &v)?,
                "sigma-grid" => set_opt(&mut self.sigma_grid, &k, &v)?,
                "trials" => set_opt(&mut self.trials, &k, &v)?,
                "seed" => set_opt(&mut self.seed, &k, &v)?,
                other => return Err(format!("unknown config key '{other}'")),
            }
        }
        Ok(())
    }
}

fn run_concentration(mut a: ConcentrationArgs) -> Result<bool, RunError> {
    a.merge_config().map_err(RunError::Config)?;
    let lemmas: Vec<LemmaId> = match a.lemma.as_deref().unwrap_or("all") {
        "all" => LemmaId::ALL.to_vec(),
        name => vec![name
            .parse()
            .map_err(|e: Error| RunError::Config(format!(
                "invalid value for config key 'lemma': {e}"
            )))?],
    };
    let ns: Vec<usize> = parse_list(a.n_grid.as_deref().unwrap_or("16,64,256"), "n-grid")
        .map_err(RunError::Config)?;
    let ms: Vec<usize> =
        parse_list(a.m_grid.as_deref().unwrap_or("1,8,32"), "m-grid").map_err(RunError::Config)?;
    let ts: Vec<f64> =
        parse_list(a.t_grid.as_deref().unwrap_or("1,2,4"), "t-grid").map_err(RunError::Config)?;
    let sigmas: Vec<f64> = parse_list(a.sigma_grid.as_deref().unwrap_or("0.1,1"), "sigma-grid")
        .map_err(RunError::Config)?;
    let trials = a.trials.unwrap_or(20_000);
    let seed = a.seed.unwrap_or(0);
    let out = a.out.unwrap_or_else(|| PathBuf::from("out"));

    let mut all = Vec::new();
    for lemma in &lemmas {
        let cells = lemma_grid(*lemma, &ns, &ms, &ts, &sigmas, trials);
        all.extend(sweep_lemma(*lemma, &cells, seed)?);
    }
    ensure_out_dir(&out)?;
    std::fs::write(out.join("concentration.csv"), results_to_csv(&all)).map_err(Error::from)?;

    let failures: Vec<String> = all
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{} n={} m={} t={}", r.lemma, r.params.n, r.params.m, r.params.t))
        .collect();
    let passed = failures.is_empty();
    for f in &failures {
        eprintln!("assertion failed: empirical tail above bound+slack at {f}");
    }
    let summary = json!({
        "command": "concentration",
        "lemmas": lemmas.iter().map(|l| l.name()).collect::<Vec<_>>(),
        "cells": all.len(),
        "trials_per_cell": trials,
        "failures": failures.len(),
        "passed": passed,
    });
    std::fs::write(
        out.join("concentration.json"),
        serde_json::to_string_pretty(&summary).expect("json"),
    )
    .map_err(Error::from)?;
    emit(&summary);
    Ok(passed)
}

// ---------------------------------------------------------------------------
// rotation-check
// ---------------------------------------------------------------------------

#[derive(Args)]
struct RotationCheckArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (rotation_check.json). Default: out
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ambient dimension. Default: 32
    #[arg(long)]
    d: Option<usize>,
    /// Codimension. Default: 8
    #[arg(long)]
    l: Option<usize>,
    /// Hidden width. Default: 32
    #[arg(long)]
    m: Option<usize>,
    /// Init scale. Default: 1/sqrt(d)
    #[arg(long)]
    beta: Option<f64>,
    /// Training points. Default: 20
    #[arg(long)]
    train_points: Option<usize>,
    /// GD steps. Default: 500
    #[arg(long)]
    steps: Option<usize>,
    /// Learning rate. Default: 0.05
    #[arg(long)]
    eta: Option<f64>,
    /// L2 strength. Default: 0
    #[arg(long)]
    lambda: Option<f64>,
    /// Held-out probe points. Default: 100
    #[arg(long)]
    test_points: Option<usize>,
    /// Master seed. Default: 0
    #[arg(long)]
    seed: Option<u64>,
    /// Allowed output discrepancy. Default: 1e-6
    #[arg(long)]
    tolerance: Option<f64>,
}

impl RotationCheckArgs {
    fn merge_config(&mut self) -> Result<(), String> {
        let Some(path) = self.config.clone() else {
            return Ok(());
        };
        for (k, v) in load_config(&path)? {
            match k.as_str() {
                "out" => set_opt(&mut self.out, &k, &v)?,
                "d" => set_opt(&mut self.d, &k, &v)?,
                "l" => set_opt(&mut self.l, &k, &v)?,
                "m" => set_opt(&mut self.m, &k, &v)?,
                "beta" => set_opt(&mut self.beta, &k, &v)?,
                "train-points" => set_opt(&mut self.train_points, &k, &v)?,
                "steps" => set_opt(&mut self.steps, &k, &v)?,
                "eta" => set_opt(&mut self.eta, &k, &v)?,
                "lambda" => set_opt(&mut self.lambda, &k, &v)?,
                "test-points" => set_opt(&mut self.test_points, &k, &v)?,
                "seed" => set_opt(&mut self.seed, &k, &v)?,
                "tolerance" => set_opt(&mut self.tolerance, &k, &v)?,
                other => return Err(format!("unknown config key '{other}'")),
            }
        }
        Ok(())
    }
}

fn run_rotation_check(mut a: RotationCheckArgs) -> Result<bool, RunError> {
    a.merge_config().map_err(RunError::Config)?;
    let d = a.d.unwrap_or(32);
    let l = a.l.unwrap_or(8);
    let m = a.m.unwrap_or(32);
    let mut cfg = RotationCheckConfig::new(d, l, m);
    if let Some(b) = a.beta {
        cfg.beta = b;
    }
    if let Some(v) = a.train_points {
        cfg.train_points = v;
    }
    if let Some(v) = a.steps {
        cfg.steps = v;
    }
    if let Some(v) = a.eta {
        cfg.eta = v;
    }
    if let Some(v) = a.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = a.test_points {
        cfg.test_points = v;
    }
    cfg.seed = a.seed.unwrap_or(0);
    if let Some(v) = a.tolerance {
        cfg.tolerance = v;
    }
    let out = a.out.unwrap_or_else(|| PathBuf::from("out"));

    let res = rotation_check(&cfg)?;
    if !res.passed {
        eprintln!(
            "assertion failed: rotation discrepancy {} above tolerance {}",
            res.max_discrepancy, res.tolerance
        );
    }
    let summary = json!({
        "command": "rotation-check",
        "d": d, "l": l, "m": m,
        "steps": cfg.steps,
        "test_points": cfg.test_points,
        "max_discrepancy": res.max_discrepancy,
        "tolerance": res.tolerance,
        "passed": res.passed,
    });
    ensure_out_dir(&out)?;
    std::fs::write(
        out.join("rotation_check.json"),
        serde_json::to_string_pretty(&summary).expect("json"),
    )
    .map_err(Error::from)?;
    emit(&summary);
    Ok(res.passed)
}
