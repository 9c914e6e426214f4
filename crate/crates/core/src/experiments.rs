//! Seeded experiment drivers shared by the CLI and the acceptance suite.
//!
//! Every driver is deterministic given its config: each grid cell / seed gets
//! its own child stream (see [`crate::rng::child_seed`]), rows come out
//! sorted by grid coordinates, and reruns produce byte-identical CSV.

use ndarray::{Array1, Array2};

use crate::attacks::{gradient_report, pgd_attack, universal_perturbation, PgdMode};
use crate::data::{sphere_shell, LabeledDataset};
use crate::error::{Error, Result};
use crate::geometry::{Part, Rotation, Subspace};
use crate::network::TwoLayerNet;
use crate::rng::{child_seed, SeededRng};
use crate::training::{train, TrainConfig};

/// Random on-subspace points with fair ±1 labels — the generic training
/// fodder for freeze/decay/sandwich runs, where labels don't matter.
pub fn on_subspace_dataset(
    subspace: &Subspace,
    r: usize,
    norm: f64,
    rng: &mut SeededRng,
) -> Result<LabeledDataset> {
    let d = subspace.d();
    let mut points = Array2::zeros((r, d));
    let mut labels = Array1::zeros(r);
    for j in 0..r {
        points.row_mut(j).assign(&subspace.sample_on_p(norm, rng)?);
        labels[j] = rng.sign();
    }
    LabeledDataset::with_subspace(points, labels, subspace.clone())
}

// ---------------------------------------------------------------------------
// Gradient scan
// ---------------------------------------------------------------------------

/// One fresh net + probe point per seed; optional training before measuring.
#[derive(Debug, Clone)]
pub struct GradScanConfig {
    pub d: usize,
    pub l: usize,
    pub m: usize,
    pub beta: f64,
    /// Number of seeds (one row each).
    pub seeds: usize,
    pub base_seed: u64,
    /// `‖x₀‖` of the on-subspace probe point.
    pub x0_norm: f64,
    /// GD steps before measuring (0 = at initialization).
    pub train_steps: usize,
    pub train_eta: f64,
    /// Training points (on-subspace, random labels) when `train_steps > 0`.
    pub train_points: usize,
}

impl GradScanConfig {
    pub fn new(d: usize, l: usize, m: usize) -> GradScanConfig {
        GradScanConfig {
            d,
            l,
            m,
            beta: 1.0 / (d as f64).sqrt(),
            seeds: 100,
            base_seed: 0,
            x0_norm: ((d - l) as f64).sqrt(),
            train_steps: 0,
            train_eta: 0.05,
            train_points: 10,
        }
    }
}

/// One seed's measurements. Perturbation fields are `NaN`/`false` when the
/// closed-form perturbation is undefined for that draw (`N(x₀) = 0` or
/// `k_{y₀} = 0`) — degenerate cells are recorded, never dropped.
#[derive(Debug, Clone)]
pub struct ScanRow {
    pub seed: u64,
    pub k: usize,
    pub k_y0: usize,
    pub perp_grad: f64,
    pub lower: f64,
    pub upper: f64,
    pub z_norm: f64,
    pub z_bound: f64,
    pub flip: bool,
    pub strong_flip: bool,
    /// `lower ≤ perp_grad ≤ upper`.
    pub in_sandwich: bool,
    /// Whether the perturbation fields are populated.
    pub perturbation_defined: bool,
}

#[derive(Debug, Clone)]
pub struct GradScanResult {
    pub d: usize,
    pub l: usize,
    pub m: usize,
    pub beta: f64,
    pub rows: Vec<ScanRow>,
    /// Rows with `in_sandwich`.
    pub sandwich_pass_count: usize,
}

const SCAN_HEADER: &str = "seed,d,l,m,beta,k,k_y0,perp_grad,lower,upper,z_norm,z_bound,flip";

impl GradScanResult {
    /// Flat per-seed CSV.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(SCAN_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.seed,
                self.d,
                self.l,
                self.m,
                self.beta,
                r.k,
                r.k_y0,
                r.perp_grad,
                r.lower,
                r.upper,
                r.z_norm,
                r.z_bound,
                r.flip
            ));
        }
        out
    }
}

/// Run the scan: per seed, fresh subspace-shaped init (axis subspace — the
/// Gaussian init makes the orientation irrelevant), optional training on
/// on-subspace data, then the gradient report and closed-form perturbation.
pub fn grad_scan(cfg: &GradScanConfig) -> Result<GradScanResult> {
    let subspace = Subspace::axis(cfg.d, cfg.l)?;
    let mut rows = Vec::with_capacity(cfg.seeds);
    for seed in 0..cfg.seeds as u64 {
        let mut rng = SeededRng::new(child_seed(cfg.base_seed, "grad-scan", seed));
        let mut net = TwoLayerNet::init(cfg.d, cfg.m, cfg.beta, &mut rng)?;
        if cfg.train_steps > 0 {
            let data = on_subspace_dataset(&subspace, cfg.train_points, cfg.x0_norm, &mut rng)?;
            let tc = TrainConfig {
                eta: cfg.train_eta,
                max_steps: cfg.train_steps,
                trace_stride: cfg.train_steps.max(1),
                ..TrainConfig::default()
            };
            let (trained, _) = train(net, &data, &subspace, &tc)?;
            net = trained;
        }
        let x0 = subspace.sample_on_p(cfg.x0_norm, &mut rng)?;
        let grad = gradient_report(&net, &subspace, x0.view(), None)?;
        let in_sandwich =
            grad.perp_grad_norm >= grad.lower_bound && grad.perp_grad_norm <= grad.upper_bound;
        let row = match universal_perturbation(&net, &subspace, x0.view()) {
            Ok(p) => ScanRow {
                seed,
                k: grad.k,
                k_y0: p.k_y0,
                perp_grad: grad.perp_grad_norm,
                lower: grad.lower_bound,
                upper: grad.upper_bound,
                z_norm: p.z_norm,
                z_bound: p.z_norm_bound,
                flip: p.sign_flipped,
                strong_flip: p.strong_flip,
                in_sandwich,
                perturbation_defined: true,
            },
            Err(Error::Degenerate(_)) => {
                let y0 = if net.forward(x0.view())? >= 0.0 { 1.0 } else { -1.0 };
                let split = net.active_split(x0.view(), y0)?;
                ScanRow {
                    seed,
                    k: grad.k,
                    k_y0: split.k_y0,
                    perp_grad: grad.perp_grad_norm,
                    lower: grad.lower_bound,
                    upper: grad.upper_bound,
                    z_norm: f64::NAN,
                    z_bound: f64::NAN,
                    flip: false,
                    strong_flip: false,
                    in_sandwich,
                    perturbation_defined: false,
                }
            }
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    let sandwich_pass_count = rows.iter().filter(|r| r.in_sandwich).count();
    Ok(GradScanResult {
        d: cfg.d,
        l: cfg.l,
        m: cfg.m,
        beta: cfg.beta,
        rows,
        sandwich_pass_count,
    })
}

// ---------------------------------------------------------------------------
// Universal-perturbation trials
// ---------------------------------------------------------------------------

/// Aggregate flip statistics over a fixed number of *valid* draws.
#[derive(Debug, Clone)]
pub struct PerturbationTrials {
    pub valid: usize,
    pub sign_flips: usize,
    pub strong_flips: usize,
    /// Flipped trials whose `‖z‖` exceeded the closed-form bound.
    pub bound_violations_in_flipped: usize,
    /// Draws discarded because `N(x₀) = 0` or `k_{y₀} = 0`.
    pub degenerate_draws: usize,
    pub condition_met: bool,
    pub failure_prob: f64,
}

/// Collect `n_valid` valid perturbation reports at initialization,
/// redrawing (seed-indexed, bounded) past degenerate draws — the theorem's
/// `α` is undefined at `k_{y₀} = 0`, so such draws carry no information
/// about the flip guarantee.
pub fn perturbation_trials(
    d: usize,
    l: usize,
    m: usize,
    beta: f64,
    x0_norm: f64,
    n_valid: usize,
    base_seed: u64,
) -> Result<PerturbationTrials> {
    const MAX_ATTEMPTS: u64 = 64;
    let subspace = Subspace::axis(d, l)?;
    let mut stats = PerturbationTrials {
        valid: 0,
        sign_flips: 0,
        strong_flips: 0,
        bound_violations_in_flipped: 0,
        degenerate_draws: 0,
        condition_met: false,
        failure_prob: 0.0,
    };
    for trial in 0..n_valid as u64 {
        let mut found = false;
        for attempt in 0..MAX_ATTEMPTS {
            let mut rng = SeededRng::new(child_seed(
                base_seed,
                "perturbation-trial",
                trial * MAX_ATTEMPTS + attempt,
            ));
            let net = TwoLayerNet::init(d, m, beta, &mut rng)?;
            let x0 = subspace.sample_on_p(x0_norm, &mut rng)?;
            match universal_perturbation(&net, &subspace, x0.view()) {
                Ok(rep) => {
                    stats.valid += 1;
                    stats.condition_met = rep.condition_met;
                    stats.failure_prob = rep.failure_prob;
                    if rep.sign_flipped {
                        stats.sign_flips += 1;
                        if rep.z_norm > rep.z_norm_bound {
                            stats.bound_violations_in_flipped += 1;
                        }
                    }
                    if rep.strong_flip {
                        stats.strong_flips += 1;
                    }
                    found = true;
                    break;
                }
                Err(Error::Degenerate(_)) => {
                    stats.degenerate_draws += 1;
                }
                Err(e) => return Err(e),
            }
        }
        if !found {
            return Err(Error::Degenerate(format!(
                "trial {trial}: no valid draw in {MAX_ATTEMPTS} attempts"
            )));
        }
    }
    Ok(stats)
}

// ---------------------------------------------------------------------------
// Rotation check
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RotationCheckConfig {
    pub d: usize,
    pub l: usize,
    pub m: usize,
    pub beta: f64,
    pub train_points: usize,
    pub steps: usize,
    pub eta: f64,
    pub lambda: f64,
    pub test_points: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl RotationCheckConfig {
    pub fn new(d: usize, l: usize, m: usize) -> RotationCheckConfig {
        RotationCheckConfig {
            d,
            l,
            m,
            beta: 1.0 / (d as f64).sqrt(),
            train_points: 20,
            steps: 500,
            eta: 0.05,
            lambda: 0.0,
            test_points: 100,
            seed: 0,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RotationCheckResult {
    /// `max |N^X(x) − N^{X_R}(Rx)|` over the test points.
    pub max_discrepancy: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Train on `X` from `W⁰`, and on `RX` from rotated `W⁰Rᵀ` rows; the two
/// trained nets must agree as functions through the rotation.
pub fn rotation_check(cfg: &RotationCheckConfig) -> Result<RotationCheckResult> {
    let mut rng = SeededRng::new(child_seed(cfg.seed, "rotation-check", 0));
    let subspace = Subspace::random(cfg.d, cfg.l, &mut rng)?;
    let data = on_subspace_dataset(&subspace, cfg.train_points, (cfg.d as f64).sqrt(), &mut rng)?;
    let net = TwoLayerNet::init(cfg.d, cfg.m, cfg.beta, &mut rng)?;
    let rot = Rotation::random(cfg.d, &mut rng)?;

    let rsub = rot.apply_to_subspace(&subspace)?;
    let rdata = LabeledDataset::with_subspace(
        rot.apply_to_rows(data.points())?,
        data.labels().to_owned(),
        rsub.clone(),
    )?;
    let rnet = TwoLayerNet::from_parts(
        rot.apply_to_rows(net.weights())?,
        &net.u_signs(),
        net.beta(),
    )?;

    let tc = TrainConfig {
        eta: cfg.eta,
        lambda: cfg.lambda,
        max_steps: cfg.steps,
        trace_stride: cfg.steps.max(1),
        ..TrainConfig::default()
    };
    let (base, _) = train(net, &data, &subspace, &tc)?;
    let (rotated, _) = train(rnet, &rdata, &rsub, &tc)?;

    let mut max_discrepancy = 0.0f64;
    for _ in 0..cfg.test_points {
        let x = rng.gaussian_vector(cfg.d, 1.0)?;
        let rx = rot.apply(x.view())?;
        let a = base.forward(x.view())?;
        let b = rotated.forward(rx.view())?;
        max_discrepancy = max_discrepancy.max((a - b).abs());
    }
    Ok(RotationCheckResult {
        max_discrepancy,
        tolerance: cfg.tolerance,
        passed: max_discrepancy <= cfg.tolerance,
    })
}

// ---------------------------------------------------------------------------
// Initialization sweep (robustness vs init scale)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct InitSweepConfig {
    pub d: usize,
    /// Sphere dimension; the data subspace is the first `sphere_dim` axes.
    pub sphere_dim: usize,
    pub m: usize,
    /// β before division (`1/√d` by default).
    pub base_beta: f64,
    pub divisors: Vec<f64>,
    pub modes: Vec<PgdMode>,
    pub radius: f64,
    pub train_points: usize,
    pub attack_points: usize,
    pub steps: usize,
    pub eta: f64,
    /// PGD step = `radius / step_divisor`.
    pub step_divisor: f64,
    pub pgd_max_iters: usize,
    pub seed: u64,
}

impl InitSweepConfig {
    pub fn new(d: usize, sphere_dim: usize, m: usize) -> InitSweepConfig {
        InitSweepConfig {
            d,
            sphere_dim,
            m,
            base_beta: 1.0 / (d as f64).sqrt(),
            divisors: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            modes: vec![PgdMode::Unprojected, PgdMode::OntoP, PgdMode::OntoPerp],
            radius: 1.0,
            train_points: 60,
            attack_points: 200,
            steps: 600,
            eta: 0.05,
            step_divisor: 100.0,
            pgd_max_iters: 4_000,
            seed: 0,
        }
    }
}

/// One (cell) of a sweep: mean/std of the PGD perturbation norm.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub divisor: f64,
    pub mode: PgdMode,
    pub mean_norm: f64,
    pub std_norm: f64,
    pub n_points: usize,
}

const SWEEP_HEADER: &str = "divisor,mode,mean_norm,std_norm,n_points";

/// Render init-sweep rows as CSV.
pub fn sweep_rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.divisor, r.mode, r.mean_norm, r.std_norm, r.n_points
        ));
    }
    out
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Matched-seed protocol: one dataset, one set of attack points, and one
/// stream of init normals shared by every divisor — only β changes across
/// cells, so the sweep isolates the initialization scale. Each trained net
/// is attacked at `attack_points` fresh on-sphere points with `y₀` the net's
/// own prediction. A diverged training cell yields NaN rows for all modes.
pub fn init_sweep(cfg: &InitSweepConfig) -> Result<Vec<SweepRow>> {
    if cfg.divisors.is_empty() || cfg.modes.is_empty() {
        return Err(Error::InvalidParam("empty divisor or mode grid".into()));
    }
    if cfg.sphere_dim == 0 || cfg.sphere_dim >= cfg.d {
        return Err(Error::InvalidParam(format!(
            "sphere_dim must be in [1, d−1], got {}",
            cfg.sphere_dim
        )));
    }
    let subspace = Subspace::axis(cfg.d, cfg.d - cfg.sphere_dim)?;
    let mut data_rng = SeededRng::new(child_seed(cfg.seed, "sweep-data", 0));
    let data = sphere_shell(
        &subspace,
        cfg.sphere_dim,
        cfg.radius,
        cfg.train_points,
        &mut data_rng,
    )?;
    let mut attack_rng = SeededRng::new(child_seed(cfg.seed, "sweep-attack", 0));
    let attack_set = sphere_shell(
        &subspace,
        cfg.sphere_dim,
        cfg.radius,
        cfg.attack_points,
        &mut attack_rng,
    )?;
    let step = cfg.radius / cfg.step_divisor;

    let mut rows = Vec::new();
    for divisor in &cfg.divisors {
        if !(*divisor > 0.0 && divisor.is_finite()) {
            return Err(Error::InvalidParam(format!("divisor must be positive, got {divisor}")));
        }
        // Same init normals for every divisor: β scales them bitwise.
        let mut init_rng = SeededRng::new(child_seed(cfg.seed, "sweep-net", 0));
        let net = TwoLayerNet::init(cfg.d, cfg.m, cfg.base_beta / divisor, &mut init_rng)?;
        let tc = TrainConfig {
            eta: cfg.eta,
            max_steps: cfg.steps,
            trace_stride: cfg.steps.max(1),
            ..TrainConfig::default()
        };
        let trained = match train(net, &data, &subspace, &tc) {
            Ok((net, _)) => Some(net),
            Err(Error::Diverged { .. }) => None,
            Err(e) => return Err(e),
        };
        for mode in &cfg.modes {
            let row = match &trained {
                None => SweepRow {
                    divisor: *divisor,
                    mode: *mode,
                    mean_norm: f64::NAN,
                    std_norm: f64::NAN,
                    n_points: 0,
                },
                Some(net) => {
                    let mut norms = Vec::with_capacity(attack_set.len());
                    for x0 in attack_set.points().outer_iter() {
                        let y0 = if net.forward(x0)? >= 0.0 { 1.0 } else { -1.0 };
                        let res =
                            pgd_attack(net, &subspace, x0, y0, *mode, step, cfg.pgd_max_iters)?;
                        norms.push(res.moved_norm);
                    }
                    let (mean_norm, std_norm) = mean_std(&norms);
                    SweepRow {
                        divisor: *divisor,
                        mode: *mode,
                        mean_norm,
                        std_norm,
                        n_points: norms.len(),
                    }
                }
            };
            rows.push(row);
        }
    }
    rows.sort_by(|a, b| {
        a.divisor
            .partial_cmp(&b.divisor)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.mode.name().cmp(b.mode.name()))
    });
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Regularization sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RegSweepConfig {
    pub d: usize,
    pub sphere_dim: usize,
    pub m: usize,
    pub beta: f64,
    pub lambdas: Vec<f64>,
    pub radius: f64,
    pub train_points: usize,
    pub attack_points: usize,
    pub steps: usize,
    pub eta: f64,
    pub step_divisor: f64,
    pub pgd_max_iters: usize,
    pub seed: u64,
}

impl RegSweepConfig {
    pub fn new(d: usize, sphere_dim: usize, m: usize) -> RegSweepConfig {
        RegSweepConfig {
            d,
            sphere_dim,
            m,
            beta: 1.0 / (d as f64).sqrt(),
            lambdas: vec![0.0, 0.005, 0.01, 0.02, 0.04],
            radius: 1.0,
            train_points: 30,
            attack_points: 50,
            steps: 400,
            eta: 0.05,
            step_divisor: 500.0,
            pgd_max_iters: 20_000,
            seed: 0,
        }
    }
}

/// One λ cell: the decay-law audit plus the off-subspace attack distance.
#[derive(Debug, Clone)]
pub struct RegSweepRow {
    pub lambda: f64,
    /// `(1−ηλ)^T`.
    pub decay_predicted: f64,
    /// `‖Π_{P⊥}W_T‖_F / ‖Π_{P⊥}W_0‖_F`.
    pub decay_measured: f64,
    /// `|measured/predicted − 1|`.
    pub decay_rel_err: f64,
    /// Decay law held within 1e-6 relative.
    pub decay_ok: bool,
    pub mean_norm: f64,
    pub std_norm: f64,
    pub n_points: usize,
}

const REG_HEADER: &str =
    "lambda,decay_predicted,decay_measured,decay_rel_err,mean_norm,std_norm,n_points";

/// Render reg-sweep rows as CSV.
pub fn reg_rows_to_csv(rows: &[RegSweepRow]) -> String {
    let mut out = String::from(REG_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.lambda,
            r.decay_predicted,
            r.decay_measured,
            r.decay_rel_err,
            r.mean_norm,
            r.std_norm,
            r.n_points
        ));
    }
    out
}

fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Matched-seed λ grid with `onto-perp` attacks: larger λ shrinks the frozen
/// off-subspace components by `(1−ηλ)^T`, which the rows audit exactly, and
/// pushes the off-subspace decision boundary further out.
pub fn reg_sweep(cfg: &RegSweepConfig) -> Result<Vec<RegSweepRow>> {
    if cfg.lambdas.is_empty() {
        return Err(Error::InvalidParam("empty lambda grid".into()));
    }
    if cfg.sphere_dim == 0 || cfg.sphere_dim >= cfg.d {
        return Err(Error::InvalidParam(format!(
            "sphere_dim must be in [1, d−1], got {}",
            cfg.sphere_dim
        )));
    }
    let subspace = Subspace::axis(cfg.d, cfg.d - cfg.sphere_dim)?;
    let mut data_rng = SeededRng::new(child_seed(cfg.seed, "sweep-data", 0));
    let data = sphere_shell(
        &subspace,
        cfg.sphere_dim,
        cfg.radius,
        cfg.train_points,
        &mut data_rng,
    )?;
    let mut attack_rng = SeededRng::new(child_seed(cfg.seed, "sweep-attack", 0));
    let attack_set = sphere_shell(
        &subspace,
        cfg.sphere_dim,
        cfg.radius,
        cfg.attack_points,
        &mut attack_rng,
    )?;
    let step = cfg.radius / cfg.step_divisor;

    let mut rows = Vec::new();
    for lambda in &cfg.lambdas {
        let mut init_rng = SeededRng::new(child_seed(cfg.seed, "sweep-net", 0));
        let net = TwoLayerNet::init(cfg.d, cfg.m, cfg.beta, &mut init_rng)?;
        let w_hat0 = subspace.project_rows(net.weights(), Part::Perp)?;
        let tc = TrainConfig {
            eta: cfg.eta,
            lambda: *lambda,
            max_steps: cfg.steps,
            trace_stride: cfg.steps.max(1),
            ..TrainConfig::default()
        };
        tc.validate()?;
        let (trained, _) = train(net, &data, &subspace, &tc)?;
        let w_hat_t = subspace.project_rows(trained.weights(), Part::Perp)?;
        let decay_predicted = (1.0 - cfg.eta * lambda).powi(cfg.steps as i32);
        let decay_measured = frobenius(&w_hat_t) / frobenius(&w_hat0);
        let decay_rel_err = (decay_measured / decay_predicted - 1.0).abs();

        let mut norms = Vec::with_capacity(attack_set.len());
        for x0 in attack_set.points().outer_iter() {
            let y0 = if trained.forward(x0)? >= 0.0 { 1.0 } else { -1.0 };
            let res = pgd_attack(
                &trained,
                &subspace,
                x0,
                y0,
                PgdMode::OntoPerp,
                step,
                cfg.pgd_max_iters,
            )?;
            norms.push(res.moved_norm);
        }
        let (mean_norm, std_norm) = mean_std(&norms);
        rows.push(RegSweepRow {
            lambda: *lambda,
            decay_predicted,
            decay_measured,
            decay_rel_err,
            decay_ok: decay_rel_err <= 1e-6,
            mean_norm,
            std_norm,
            n_points: norms.len(),
        });
    }
    rows.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap_or(std::cmp::Ordering::Equal));
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Rank statistics
// ---------------------------------------------------------------------------

fn ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // Average rank over the tie block (1-based ranks).
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation of divisor vs mean attack distance for one
/// mode's cells; `None` when a cell is NaN (diverged) or fewer than two
/// cells exist.
pub fn mode_mean_spearman(rows: &[SweepRow], mode: PgdMode) -> Option<f64> {
    let cells: Vec<&SweepRow> = rows.iter().filter(|r| r.mode == mode).collect();
    if cells.len() < 2 || cells.iter().any(|r| !r.mean_norm.is_finite()) {
        return None;
    }
    let xs: Vec<f64> = cells.iter().map(|r| r.divisor).collect();
    let ys: Vec<f64> = cells.iter().map(|r| r.mean_norm).collect();
    spearman(&xs, &ys).ok()
}

/// Relative spread `(max − min) / mean` of one mode's mean attack distances;
/// `None` on NaN cells, an empty mode, or a zero mean.
pub fn mode_mean_variation(rows: &[SweepRow], mode: PgdMode) -> Option<f64> {
    let means: Vec<f64> = rows
        .iter()
        .filter(|r| r.mode == mode)
        .map(|r| r.mean_norm)
        .collect();
    if means.is_empty() || means.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let max = means.iter().cloned().fold(f64::MIN, f64::max);
    let min = means.iter().cloned().fold(f64::MAX, f64::min);
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    if mean == 0.0 {
        return None;
    }
    Some((max - min) / mean)
}

/// Spearman rank correlation with average-rank ties; needs ≥ 2 points and
/// nonconstant inputs (returns an error otherwise, rather than NaN).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParam(format!(
            "spearman needs two equal-length series of ≥ 2 points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(ry.iter()) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::Degenerate("spearman: constant series".into()));
    }
    Ok(cov / (vx.sqrt() * vy.sqrt()))
}
