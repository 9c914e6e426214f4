//! Off-subspace gradient bounds, the closed-form universal perturbation, and
//! projected gradient attacks.
//!
//! For a net whose data lives on `P` (dim `d − ℓ`), the off-subspace weight
//! components keep their initial Gaussian law. At standard initialization
//! (`β = 1/√d`) this sandwiches the off-subspace input gradient at `x₀`
//! between `√(kℓ/2md)` and `β√(2kℓ/m)` — a factor-of-two window — each side
//! failing w.p. `≤ e^{−ℓ/16}` (`k` = active neurons at `x₀`). The same
//! frozen components admit a single *universal* direction
//! `Σ_{uᵢ<0} ŵᵢ − Σ_{uᵢ>0} ŵᵢ` (all neurons, `ŵᵢ = Π_{P⊥} wᵢ`) that flips
//! the sign of the output at any `x₀ ∈ P` once scaled by
//! `α = 8√m·d·|N(x₀)| / (ℓ·k_{y₀})`, provided `ℓ ≥ 32(m−1)·ln(m²d)`.

use ndarray::{Array1, ArrayView1};
use serde_json::json;

use crate::error::{dim_err, Error, Result};
use crate::geometry::{Part, Subspace};
use crate::linalg;
use crate::network::TwoLayerNet;
use crate::tol;

/// Post-training step counts and rates, for the regularized gradient bound.
#[derive(Debug, Clone, Copy)]
pub struct RegMeta {
    pub eta: f64,
    pub lambda: f64,
    pub t_steps: usize,
}

/// The four closed-form bounds plus the perturbation-existence condition,
/// evaluated as pure arithmetic.
#[derive(Debug, Clone)]
pub struct BoundFormulas {
    /// `√(kℓ/(2md))`.
    pub grad_lower: f64,
    /// `β√(2kℓ/m)`.
    pub grad_upper: f64,
    /// `(1−ηλ)^T·√(2kℓ/(md))`.
    pub grad_upper_reg: f64,
    /// `8√2·|N(x₀)|·(m/k_{y₀})·√(d/ℓ)`.
    pub z_norm_bound: f64,
    /// `ℓ ≥ 32(m−1)·ln(m²d)` (natural log).
    pub condition_ell_ok: bool,
    /// `32(m−1)·ln(m²d)`.
    pub condition_rhs: f64,
}

/// Evaluate every closed-form bound at the given parameters.
#[allow(clippy::too_many_arguments)]
pub fn bound_formulas(
    k: usize,
    k_y0: usize,
    l: usize,
    m: usize,
    d: usize,
    beta: f64,
    eta: f64,
    lambda: f64,
    t_steps: usize,
    n_x0: f64,
) -> Result<BoundFormulas> {
    if m == 0 || d == 0 || l == 0 {
        return Err(Error::InvalidParam(format!(
            "m, d, l must be ≥ 1, got m = {m}, d = {d}, l = {l}"
        )));
    }
    if k_y0 == 0 {
        return Err(Error::Degenerate(
            "k_y0 = 0: the perturbation norm bound is undefined".into(),
        ));
    }
    let condition_rhs = 32.0 * (m as f64 - 1.0) * ((m * m * d) as f64).ln();
    Ok(BoundFormulas {
        grad_lower: grad_lower_bound_std(k, l, m, d),
        grad_upper: grad_upper_bound_small_init(beta, k, l, m),
        grad_upper_reg: grad_upper_bound_regularized(eta, lambda, t_steps, k, l, m, d),
        z_norm_bound: 8.0
            * 2.0f64.sqrt()
            * n_x0.abs()
            * (m as f64 / k_y0 as f64)
            * (d as f64 / l as f64).sqrt(),
        condition_ell_ok: l as f64 >= condition_rhs,
        condition_rhs,
    })
}

/// `√(kℓ/(2md))` — the off-subspace gradient lower bound at standard
/// initialization (`β = 1/√d`), valid w.p. `≥ 1 − e^{−ℓ/16}`.
pub fn grad_lower_bound_std(k: usize, l: usize, m: usize, d: usize) -> f64 {
    ((k * l) as f64 / (2.0 * (m * d) as f64)).sqrt()
}

/// `β·√(2kℓ/m)` — the off-subspace gradient upper bound for entry-wise
/// `N(0, β²)` initialization, valid w.p. `≥ 1 − e^{−ℓ/16}`.
pub fn grad_upper_bound_small_init(beta: f64, k: usize, l: usize, m: usize) -> f64 {
    beta * (2.0 * (k * l) as f64 / m as f64).sqrt()
}

/// `(1−ηλ)^T · √(2kℓ/(md))` — the upper bound after `T` steps of L₂
/// regularization from standard initialization.
pub fn grad_upper_bound_regularized(
    eta: f64,
    lambda: f64,
    t: usize,
    k: usize,
    l: usize,
    m: usize,
    d: usize,
) -> f64 {
    (1.0 - eta * lambda).powi(t as i32) * (2.0 * (k * l) as f64 / (m * d) as f64).sqrt()
}

/// `e^{−ℓ/16}` — the per-side failure probability of the gradient bounds.
pub fn grad_bound_failure_prob(l: usize) -> f64 {
    (-(l as f64) / 16.0).exp()
}

fn check_on_subspace(subspace: &Subspace, x0: ArrayView1<'_, f64>, what: &str) -> Result<()> {
    let perp = subspace.project(x0, Part::Perp)?;
    let residual = linalg::norm(&perp.view());
    if residual > tol::ON_SUBSPACE * linalg::norm(&x0).max(1.0) {
        return Err(Error::InvalidParam(format!(
            "{what}: x0 is off the data subspace (residual {residual:.3e})"
        )));
    }
    Ok(())
}

/// Measured off-subspace gradient at a point, with the matching bounds.
#[derive(Debug, Clone)]
pub struct GradientReport {
    /// `‖∇ₓN(x₀)‖` (unprojected, for comparison).
    pub full_grad_norm: f64,
    /// `‖Π_{P⊥} ∇ₓN(x₀)‖`.
    pub perp_grad_norm: f64,
    /// Active neurons `k = |{i : ⟨wᵢ,x₀⟩ ≥ 0}|`, and the shape parameters.
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub d: usize,
    /// `√(kℓ/(2md))` — standard-initialization lower bound.
    pub lower_bound: f64,
    /// `β√(2kℓ/m)` with the net's own `β`; equals `2 × lower_bound` exactly
    /// when `β = 1/√d`.
    pub upper_bound: f64,
    /// `(1−ηλ)^T·√(2kℓ/(md))`, when training metadata is supplied.
    pub reg_upper_bound: Option<f64>,
    /// `e^{−ℓ/16}` per bound side.
    pub failure_prob: f64,
}

impl GradientReport {
    /// Full-field JSON rendering.
    pub fn to_json(&self) -> String {
        json!({
            "full_grad_norm": self.full_grad_norm,
            "perp_grad_norm": self.perp_grad_norm,
            "k": self.k,
            "l": self.l,
            "m": self.m,
            "d": self.d,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "reg_upper_bound": self.reg_upper_bound,
            "failure_prob": self.failure_prob,
        })
        .to_string()
    }
}

/// Measure `‖Π_{P⊥} ∇ₓN(x₀)‖` and attach the closed-form bounds (`β` comes
/// from the net itself; `reg` adds the regularized-training bound).
pub fn gradient_report(
    net: &TwoLayerNet,
    subspace: &Subspace,
    x0: ArrayView1<'_, f64>,
    reg: Option<RegMeta>,
) -> Result<GradientReport> {
    if subspace.d() != net.d() {
        return Err(dim_err("gradient_report: subspace", net.d(), subspace.d()));
    }
    check_on_subspace(subspace, x0, "gradient_report")?;
    let g = net.input_gradient(x0)?;
    let perp = subspace.project(g.view(), Part::Perp)?;
    let split = net.active_split(x0, 1.0)?;
    let (k, l, m, d) = (split.k, subspace.l(), net.m(), net.d());
    Ok(GradientReport {
        full_grad_norm: linalg::norm(&g.view()),
        perp_grad_norm: linalg::norm(&perp.view()),
        k,
        l,
        m,
        d,
        lower_bound: grad_lower_bound_std(k, l, m, d),
        upper_bound: grad_upper_bound_small_init(net.beta(), k, l, m),
        reg_upper_bound: reg
            .map(|r| grad_upper_bound_regularized(r.eta, r.lambda, r.t_steps, k, l, m, d)),
        failure_prob: grad_bound_failure_prob(l),
    })
}

/// The universal direction `Σ_{uᵢ<0} ŵᵢ − Σ_{uᵢ>0} ŵᵢ` over *all* neurons
/// (`ŵᵢ = Π_{P⊥} wᵢ`). Every point's closed-form perturbation is this vector
/// times `y₀·α(x₀)`; the direction itself never depends on the input.
pub fn perturbation_direction(net: &TwoLayerNet, subspace: &Subspace) -> Result<Array1<f64>> {
    if subspace.d() != net.d() {
        return Err(dim_err(
            "perturbation_direction: subspace",
            net.d(),
            subspace.d(),
        ));
    }
    let w_hat = subspace.project_rows(net.weights(), Part::Perp)?;
    let mut dir = Array1::<f64>::zeros(net.d());
    for (i, row) in w_hat.outer_iter().enumerate() {
        let sign = if net.u()[i] > 0.0 { -1.0 } else { 1.0 };
        dir.scaled_add(sign, &row);
    }
    Ok(dir)
}

/// The closed-form perturbation at one point, with every theorem quantity.
#[derive(Debug, Clone)]
pub struct PerturbationReport {
    /// `sign(N(x₀))`.
    pub y0: f64,
    /// `N(x₀)`.
    pub output_before: f64,
    /// `N(x₀ + z)`.
    pub output_after: f64,
    /// Active neurons at `x₀`, split by the sign of `uᵢ`.
    pub k: usize,
    pub k_plus: usize,
    pub k_minus: usize,
    /// `k₋` if `y₀ = +1`, else `k₊`.
    pub k_y0: usize,
    /// `8√m·d·|N(x₀)| / (ℓ·k_{y₀})`.
    pub alpha: f64,
    /// `y₀·α·(Σ_{uᵢ<0} ŵᵢ − Σ_{uᵢ>0} ŵᵢ)`.
    pub z: Array1<f64>,
    pub z_norm: f64,
    /// `8√2·|N(x₀)|·(m/k_{y₀})·√(d/ℓ)`.
    pub z_norm_bound: f64,
    /// `sign(N(x₀+z)) ≠ sign(N(x₀))` (an exact zero counts as flipped).
    pub sign_flipped: bool,
    /// `y₀·N(x₀+z) ≤ −|N(x₀)|` — the proof's stronger conclusion.
    pub strong_flip: bool,
    /// `C = αℓ/(2d) − (α/d)·√(2ℓ(m−1)·ln(m²d))` — the proof's per-neuron
    /// preactivation gain on the relied-upon neurons.
    pub guaranteed_gain: f64,
    /// `ℓ ≥ 32(m−1)·ln(m²d)` — the regime where the flip is guaranteed.
    pub condition_met: bool,
    /// `32(m−1)·ln(m²d)`.
    pub condition_rhs: f64,
    /// `5(m·e^{−ℓ/16} + d^{−1/2})` — the theorem's failure budget.
    pub failure_prob: f64,
}

impl PerturbationReport {
    /// Full-field JSON rendering (`z` as a plain array).
    pub fn to_json(&self) -> String {
        json!({
            "y0": self.y0,
            "output_before": self.output_before,
            "output_after": self.output_after,
            "k": self.k,
            "k_plus": self.k_plus,
            "k_minus": self.k_minus,
            "k_y0": self.k_y0,
            "alpha": self.alpha,
            "z": self.z.to_vec(),
            "z_norm": self.z_norm,
            "z_norm_bound": self.z_norm_bound,
            "sign_flipped": self.sign_flipped,
            "strong_flip": self.strong_flip,
            "guaranteed_gain": self.guaranteed_gain,
            "condition_met": self.condition_met,
            "condition_rhs": self.condition_rhs,
            "failure_prob": self.failure_prob,
        })
        .to_string()
    }
}

/// Build the closed-form universal perturbation for `x₀ ∈ P` and evaluate
/// its effect. A failed flip is a valid outcome (`sign_flipped = false`);
/// only `N(x₀) = 0` (no sign to flip) and `k_{y₀} = 0` (the scale `α` is
/// undefined) are errors.
pub fn universal_perturbation(
    net: &TwoLayerNet,
    subspace: &Subspace,
    x0: ArrayView1<'_, f64>,
) -> Result<PerturbationReport> {
    if subspace.d() != net.d() {
        return Err(dim_err(
            "universal_perturbation: subspace",
            net.d(),
            subspace.d(),
        ));
    }
    check_on_subspace(subspace, x0, "universal_perturbation")?;
    let output_before = net.forward(x0)?;
    if output_before == 0.0 {
        return Err(Error::Degenerate(
            "universal perturbation needs N(x0) ≠ 0".into(),
        ));
    }
    let y0 = output_before.signum();
    let split = net.active_split(x0, y0)?;
    if split.k_y0 == 0 {
        return Err(Error::Degenerate(format!(
            "k_y0 = 0 at this point (k₊ = {}, k₋ = {}): alpha is undefined",
            split.k_plus, split.k_minus
        )));
    }
    let (d, m, l) = (net.d(), net.m(), subspace.l());
    let n_abs = output_before.abs();
    let alpha = 8.0 * (m as f64).sqrt() * d as f64 * n_abs / (l as f64 * split.k_y0 as f64);
    let mut z = perturbation_direction(net, subspace)?;
    z.mapv_inplace(|v| v * y0 * alpha);
    let z_norm = linalg::norm(&z.view());
    let z_norm_bound =
        8.0 * 2.0f64.sqrt() * n_abs * (m as f64 / split.k_y0 as f64) * (d as f64 / l as f64).sqrt();
    let output_after = net.forward((&x0.to_owned() + &z).view())?;
    let log_term = ((m * m * d) as f64).ln();
    let condition_rhs = 32.0 * (m as f64 - 1.0) * log_term;
    let guaranteed_gain = alpha * l as f64 / (2.0 * d as f64)
        - alpha / d as f64 * (2.0 * l as f64 * (m as f64 - 1.0) * log_term).sqrt();
    Ok(PerturbationReport {
        y0,
        output_before,
        output_after,
        k: split.k,
        k_plus: split.k_plus,
        k_minus: split.k_minus,
        k_y0: split.k_y0,
        alpha,
        z_norm,
        z_norm_bound,
        sign_flipped: output_after.signum() != output_before.signum(),
        strong_flip: y0 * output_after <= -n_abs,
        guaranteed_gain,
        condition_met: l as f64 >= condition_rhs,
        condition_rhs,
        failure_prob: 5.0 * (m as f64 * (-(l as f64) / 16.0).exp() + (d as f64).powf(-0.5)),
        z,
    })
}

/// Where a projected gradient attack is allowed to move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgdMode {
    /// Unconstrained: follow the raw input gradient.
    Unprojected,
    /// Restrict the perturbation to the data subspace `P`.
    OntoP,
    /// Restrict the perturbation to the orthogonal complement `P⊥`.
    OntoPerp,
}

impl PgdMode {
    pub fn name(self) -> &'static str {
        match self {
            PgdMode::Unprojected => "unprojected",
            PgdMode::OntoP => "onto-p",
            PgdMode::OntoPerp => "onto-perp",
        }
    }
}

impl std::fmt::Display for PgdMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PgdMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<PgdMode> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "unprojected" | "full" => Ok(PgdMode::Unprojected),
            "onto-p" => Ok(PgdMode::OntoP),
            "onto-p-perp" | "onto-perp" => Ok(PgdMode::OntoPerp),
            other => Err(Error::InvalidParam(format!(
                "unknown pgd mode '{other}' (unprojected | onto-p | onto-perp)"
            ))),
        }
    }
}

/// The default step length: `‖x₀‖/1000` (distance-to-boundary resolution).
pub fn default_pgd_step(x0_norm: f64) -> f64 {
    x0_norm / 1000.0
}

/// Default iteration budget.
pub const DEFAULT_PGD_MAX_ITERS: usize = 10_000;

/// Outcome of a projected gradient attack.
#[derive(Debug, Clone)]
pub struct PgdResult {
    /// The final `δ = x_final − x₀`.
    pub perturbation: Array1<f64>,
    pub flipped: bool,
    /// Steps actually taken: the flip step, or the full budget, or fewer if
    /// the usable gradient vanished.
    pub iterations_used: usize,
    /// `‖δ‖`.
    pub moved_norm: f64,
    pub final_output: f64,
}

/// Walk `δ ← δ + step·ĝ` with `ĝ` the mode-projected, unit-normalized
/// direction of `−y₀·∇ₓN(x₀+δ)`, until `y₀·N(x₀+δ) ≤ 0` or the budget is
/// spent. Starting already on the wrong side reports a zero-step flip; a
/// vanishing projected gradient reports `flipped = false` (not an error).
pub fn pgd_attack(
    net: &TwoLayerNet,
    subspace: &Subspace,
    x0: ArrayView1<'_, f64>,
    y0: f64,
    mode: PgdMode,
    step: f64,
    max_iters: usize,
) -> Result<PgdResult> {
    crate::network::check_label(y0)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "pgd step must be positive, got {step}"
        )));
    }
    if subspace.d() != net.d() {
        return Err(dim_err("pgd_attack: subspace", net.d(), subspace.d()));
    }
    let mut x = x0.to_owned();
    let finish = |x: Array1<f64>, iterations_used: usize, flipped: bool, out: f64| {
        let delta = &x - &x0;
        PgdResult {
            moved_norm: linalg::norm(&delta.view()),
            perturbation: delta,
            flipped,
            iterations_used,
            final_output: out,
        }
    };

    let out0 = net.forward(x.view())?;
    if y0 * out0 <= 0.0 {
        return Ok(finish(x, 0, true, out0));
    }
    let mut out = out0;
    for iter in 1..=max_iters {
        let g = net.input_gradient(x.view())?;
        let dir = match mode {
            PgdMode::Unprojected => g,
            PgdMode::OntoP => subspace.project(g.view(), Part::P)?,
            PgdMode::OntoPerp => subspace.project(g.view(), Part::Perp)?,
        };
        let norm = linalg::norm(&dir.view());
        if norm <= 1e-30 {
            // Nothing to follow in this mode (e.g. dead ReLUs): stuck.
            return Ok(finish(x, iter - 1, false, out));
        }
        x.scaled_add(-y0 * step / norm, &dir);
        out = net.forward(x.view())?;
        if y0 * out <= 0.0 {
            return Ok(finish(x, iter, true, out));
        }
    }
    Ok(finish(x, max_iters, false, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::TwoLayerNet;
    use crate::rng::SeededRng;
    use ndarray::array;

    /// d = 4, P = span{e₁,e₂}: two neurons with hand-set off-subspace parts.
    fn hand_net() -> (TwoLayerNet, Subspace) {
        let weights = array![[1.0, 0.0, 0.5, -0.2], [0.5, 0.0, -0.3, 0.4]];
        let net = TwoLayerNet::from_parts(weights, &[1, -1], 1.0).unwrap();
        let sub = Subspace::axis(4, 2).unwrap();
        (net, sub)
    }

    #[test]
    fn hand_computed_perturbation_matches() {
        let (net, sub) = hand_net();
        let x0 = array![2.0, 0.0, 0.0, 0.0];
        // N(x₀) = (2 − 1)/√2, y₀ = +1, k = 2, k₊ = k₋ = 1, k_{y₀} = k₋ = 1.
        // α = 8·√2·4·(1/√2) / (2·1) = 16.
        // direction = ŵ₂ − ŵ₁ = (0,0,−0.8,0.6); z = 16·direction.
        let rep = universal_perturbation(&net, &sub, x0.view()).unwrap();
        assert_eq!(rep.y0, 1.0);
        assert!((rep.output_before - std::f64::consts::FRAC_1_SQRT_2).abs() < tol::FORMULA);
        assert_eq!((rep.k, rep.k_plus, rep.k_minus, rep.k_y0), (2, 1, 1, 1));
        assert!((rep.alpha - 16.0).abs() < 1e-12, "alpha = {}", rep.alpha);
        let expect = [0.0, 0.0, -12.8, 9.6];
        for (zi, ei) in rep.z.iter().zip(expect.iter()) {
            assert!((zi - ei).abs() < 1e-12, "z = {:?}", rep.z);
        }
        assert!((rep.z_norm - 16.0).abs() < 1e-12);
        // bound = 8√2·(1/√2)·(2/1)·√(4/2) = 16√2.
        assert!((rep.z_norm_bound - 16.0 * 2.0f64.sqrt()).abs() < 1e-12);
        assert!(rep.z_norm <= rep.z_norm_bound);
        // x₀ + z = (2,0,−12.8,9.6): neuron 1 dies, neuron 2 fires 8.68.
        assert!((rep.output_after - (-8.68 / 2.0f64.sqrt())).abs() < 1e-12);
        assert!(rep.sign_flipped && rep.strong_flip);
        // C = 16·2/8 − (16/4)·√(2·2·1·ln 16) = 4 − 4·√(4 ln 16) < 0: the
        // guarantee needs ℓ ≥ 32·1·ln 16 ≈ 88.7, far above ℓ = 2.
        let expect_c = 4.0 - 4.0 * (4.0 * (16.0f64).ln()).sqrt();
        assert!((rep.guaranteed_gain - expect_c).abs() < 1e-12);
        assert!(!rep.condition_met);
        assert!((rep.condition_rhs - 32.0 * (16.0f64).ln()).abs() < 1e-9);
        let expect_fail = 5.0 * (2.0 * (-2.0f64 / 16.0).exp() + 0.5);
        assert!((rep.failure_prob - expect_fail).abs() < 1e-12);
        // JSON carries the full field set.
        let js: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(js["k_y0"], 1);
        assert_eq!(js["z"].as_array().unwrap().len(), 4);
        assert_eq!(js["sign_flipped"], true);
    }

    #[test]
    fn perturbation_errors_on_degenerate_inputs() {
        let (net, sub) = hand_net();
        // Both neurons active with canceling contributions ⇒ N = 0.
        let x0 = array![0.0, 0.0, 0.0, 0.0];
        assert!(matches!(
            universal_perturbation(&net, &sub, x0.view()),
            Err(Error::Degenerate(_))
        ));
        // All-positive u with y₀ = +1: k₋ = k_{y₀} = 0.
        let weights = array![[1.0, 0.0, 0.5, -0.2], [0.5, 0.0, -0.3, 0.4]];
        let net2 = TwoLayerNet::from_parts(weights, &[1, 1], 1.0).unwrap();
        let x0 = array![2.0, 0.0, 0.0, 0.0];
        match universal_perturbation(&net2, &sub, x0.view()) {
            Err(Error::Degenerate(msg)) => assert!(msg.contains("k_y0")),
            other => panic!("expected degenerate, got {other:?}"),
        }
        // Off-subspace x₀ is rejected up front.
        let off = array![2.0, 0.0, 1.0, 0.0];
        assert!(universal_perturbation(&net, &sub, off.view()).is_err());
    }

    #[test]
    fn perturbation_direction_is_universal_and_in_perp() {
        let mut rng = SeededRng::new(300);
        let sub = Subspace::random(24, 10, &mut rng).unwrap();
        let net = TwoLayerNet::init(24, 6, 1.0 / (24.0f64).sqrt(), &mut rng).unwrap();
        let dir = perturbation_direction(&net, &sub).unwrap();
        let dn = linalg::norm(&dir.view());
        assert!(dn > 0.0);
        let mut checked = 0;
        for _ in 0..12 {
            let x0 = sub.sample_on_p(3.0, &mut rng).unwrap();
            let Ok(rep) = universal_perturbation(&net, &sub, x0.view()) else {
                continue;
            };
            // z ∥ direction with coefficient y₀·α exactly.
            let expect = dir.mapv(|v| v * rep.y0 * rep.alpha);
            for (a, b) in rep.z.iter().zip(expect.iter()) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
            // z lives in P⊥.
            let leak = sub.project(rep.z.view(), Part::P).unwrap();
            assert!(linalg::norm(&leak.view()) <= 1e-9 * rep.z_norm);
            checked += 1;
        }
        assert!(checked >= 5, "too many degenerate draws: {checked}");
    }

    #[test]
    fn alpha_scales_linearly_with_output() {
        // ReLU nets are 1-homogeneous: scaling x₀ by c > 0 keeps the active
        // set and scales N(x₀), so α(c·x₀) = c·α(x₀) and z stretches with it.
        let (net, sub) = hand_net();
        let x0 = array![2.0, 0.0, 0.0, 0.0];
        let a = universal_perturbation(&net, &sub, x0.view()).unwrap();
        let x1 = array![6.0, 0.0, 0.0, 0.0];
        let b = universal_perturbation(&net, &sub, x1.view()).unwrap();
        assert!((b.alpha / a.alpha - 3.0).abs() < 1e-12);
        assert!((b.z_norm / a.z_norm - 3.0).abs() < 1e-12);
        assert!((b.z_norm_bound / a.z_norm_bound - 3.0).abs() < 1e-12);
    }

    #[test]
    fn perturbation_flips_labels_at_theorem_scale() {
        // d = 1024, ℓ = 960, m = 4: 32·3·ln(16·1024) ≈ 931.6 ≤ 960, so the
        // strong flip is guaranteed w.p. ≥ 1 − 5(4e⁻⁶⁰ + 1/32) ≈ 0.84.
        let d = 1024;
        let l = 960;
        let sub = Subspace::axis(d, l).unwrap();
        let mut strong = 0;
        let mut valid = 0;
        // At m = 4 an empty active half forces the matching output sign, so
        // k_{y₀} = 0 degeneracies are common; redraw past them (the theorem
        // conditions on k_{y₀} ≥ 1) until 20 valid draws are collected.
        let mut seed = 0;
        while valid < 20 {
            seed += 1;
            assert!(seed < 120, "only {valid} valid draws in {seed} attempts");
            let mut rng = SeededRng::new(4000 + seed);
            let net = TwoLayerNet::init(d, 4, 1.0 / (d as f64).sqrt(), &mut rng).unwrap();
            let x0 = sub.sample_on_p((d as f64).sqrt(), &mut rng).unwrap();
            let Ok(rep) = universal_perturbation(&net, &sub, x0.view()) else {
                continue;
            };
            assert!(rep.condition_met);
            valid += 1;
            // The theorem promises BOTH the flip and the norm bound inside
            // one failure budget; count joint successes.
            if rep.strong_flip && rep.z_norm <= rep.z_norm_bound {
                strong += 1;
            }
        }
        let rate = strong as f64 / valid as f64;
        assert!(rate >= 0.7, "joint success rate {rate} ({strong}/{valid})");
    }

    #[test]
    fn gradient_sandwich_holds_at_init() {
        // d = 256, ℓ = 128, m = 128 at β = 1/√d: each side fails w.p.
        // ≤ e⁻⁸ ≈ 3.4e-4, so ≥ 95 of 100 seeds must land inside.
        let d = 256;
        let l = 128;
        let m = 128;
        let sub = Subspace::axis(d, l).unwrap();
        let mut inside = 0;
        let trials = 100;
        for seed in 0..trials {
            let mut rng = SeededRng::new(7000 + seed);
            let net = TwoLayerNet::init(d, m, 1.0 / (d as f64).sqrt(), &mut rng).unwrap();
            let x0 = sub.sample_on_p(16.0, &mut rng).unwrap();
            let rep = gradient_report(&net, &sub, x0.view(), None).unwrap();
            assert!(rep.perp_grad_norm <= rep.full_grad_norm + 1e-12);
            assert!(rep.lower_bound >= 0.0 && rep.upper_bound >= 0.0);
            // At β = 1/√d the window is exactly a factor of two.
            assert!((rep.upper_bound - 2.0 * rep.lower_bound).abs() < tol::FORMULA);
            if rep.perp_grad_norm >= rep.lower_bound && rep.perp_grad_norm <= rep.upper_bound {
                inside += 1;
            }
        }
        assert!(inside >= 95, "sandwich held in only {inside}/{trials} seeds");
    }

    #[test]
    fn gradient_report_handles_no_active_neurons() {
        let (net, sub) = hand_net();
        // x₀ = (−2, 0): both preactivations negative ⇒ k = 0, gradient 0.
        let x0 = array![-2.0, 0.0, 0.0, 0.0];
        let rep = gradient_report(&net, &sub, x0.view(), None).unwrap();
        assert_eq!(rep.k, 0);
        assert_eq!(rep.lower_bound, 0.0);
        assert_eq!(rep.perp_grad_norm, 0.0);
        assert_eq!(rep.full_grad_norm, 0.0);
        // Regularized bound appears only with metadata.
        assert!(rep.reg_upper_bound.is_none());
        let x1 = array![2.0, 0.0, 0.0, 0.0];
        let rep = gradient_report(
            &net,
            &sub,
            x1.view(),
            Some(RegMeta {
                eta: 0.1,
                lambda: 0.5,
                t_steps: 1,
            }),
        )
        .unwrap();
        let expect = 0.95 * (2.0 * (rep.k * rep.l) as f64 / (rep.m * rep.d) as f64).sqrt();
        assert!((rep.reg_upper_bound.unwrap() - expect).abs() < tol::FORMULA);
        let js: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(js["k"], 2);
    }

    #[test]
    fn bound_formulas_are_exact() {
        // k = m, ℓ = d: lower = √(ℓ/2d) = 1/√2, upper(β=1/√d) = √2.
        let b = bound_formulas(16, 4, 64, 16, 64, 1.0 / 8.0, 0.1, 0.0, 0, 1.0).unwrap();
        assert!((b.grad_lower - std::f64::consts::FRAC_1_SQRT_2).abs() < tol::FORMULA);
        assert!((b.grad_upper - std::f64::consts::SQRT_2).abs() < tol::FORMULA);
        // λ = 0 ⇒ the reg bound equals the β = 1/√d upper bound forever.
        assert!((b.grad_upper_reg - b.grad_upper).abs() < tol::FORMULA);

        // Small-init corollary: β = 1/(d√2) with k ≤ m, ℓ ≤ d gives ≤ 1/√d.
        let d = 50;
        let beta = 1.0 / (d as f64 * 2.0f64.sqrt());
        for (k, l) in [(7, d), (7, 13), (3, 29)] {
            let b = bound_formulas(k, 1, l, 7, d, beta, 0.1, 0.0, 0, 1.0).unwrap();
            assert!(b.grad_upper <= 1.0 / (d as f64).sqrt() + tol::FORMULA);
        }
        // Regularized corollary: (1−ηλ)^T ≤ 1/√(2d) forces reg ≤ 1/√d.
        // η = 0.5, λ = 0.2 ⇒ (0.9)^T ≤ 1/√100 at T = 44 (0.9^44 ≈ 0.0097).
        let b = bound_formulas(9, 1, 50, 9, 50, 0.1, 0.5, 0.2, 44, 1.0).unwrap();
        assert!(0.9f64.powi(44) <= 1.0 / (2.0 * 50.0f64).sqrt());
        assert!(b.grad_upper_reg <= 1.0 / 50.0f64.sqrt() + tol::FORMULA);
        // Each step multiplies the reg bound by exactly (1 − ηλ).
        let b0 = bound_formulas(3, 1, 8, 6, 32, 0.1, 0.1, 0.5, 0, 1.0).unwrap();
        let b1 = bound_formulas(3, 1, 8, 6, 32, 0.1, 0.1, 0.5, 1, 1.0).unwrap();
        assert!((b1.grad_upper_reg / b0.grad_upper_reg - 0.95).abs() < tol::FORMULA);

        // m = 1: condition threshold is 0, any ℓ ≥ 1 passes.
        let b = bound_formulas(1, 1, 1, 1, 10, 0.3, 0.1, 0.0, 0, 1.0).unwrap();
        assert_eq!(b.condition_rhs, 0.0);
        assert!(b.condition_ell_ok);
        // z bound matches the perturbation report's.
        let (net, sub) = hand_net();
        let x0 = array![2.0, 0.0, 0.0, 0.0];
        let rep = universal_perturbation(&net, &sub, x0.view()).unwrap();
        let b = bound_formulas(2, 1, 2, 2, 4, 1.0, 0.1, 0.0, 0, rep.output_before).unwrap();
        assert!((b.z_norm_bound - rep.z_norm_bound).abs() < tol::FORMULA);
        // Degenerate and invalid parameters.
        assert!(bound_formulas(2, 0, 2, 2, 4, 1.0, 0.1, 0.0, 0, 1.0).is_err());
        assert!(bound_formulas(2, 1, 2, 0, 4, 1.0, 0.1, 0.0, 0, 1.0).is_err());
        assert!((grad_bound_failure_prob(16) - (-1.0f64).exp()).abs() < tol::FORMULA);
    }

    #[test]
    fn pgd_matches_the_closed_form_in_the_linear_regime() {
        // w₁ = e₁ (u = +1/√2), w₂ = −e₂ (u = −1/√2), x₀ = (3,−1):
        // both neurons stay active along the path, N(x) = √2 − n·step, so the
        // flip lands at the first n with n·step ≥ √2 → n = ⌈√2/0.01⌉ = 142.
        let net =
            TwoLayerNet::from_parts(array![[1.0, 0.0], [0.0, -1.0]], &[1, -1], 1.0).unwrap();
        let sub = Subspace::axis(2, 1).unwrap();
        let x0 = array![3.0, -1.0];
        let res =
            pgd_attack(&net, &sub, x0.view(), 1.0, PgdMode::Unprojected, 0.01, 1000).unwrap();
        assert!(res.flipped);
        assert_eq!(res.iterations_used, 142);
        // Closed-form distance |N(x₀)|/‖∇N‖ = √2, within one step.
        assert!((res.moved_norm - 2.0f64.sqrt()).abs() <= 0.01 + 1e-12);
        assert!(res.final_output <= 0.0);
        // δ = final − start points along −(1,1)/√2.
        assert!((res.perturbation[0] - res.perturbation[1]).abs() < 1e-12);
        assert!(res.perturbation[0] < 0.0);
    }

    #[test]
    fn pgd_projection_modes_respect_the_split() {
        let mut rng = SeededRng::new(310);
        let d = 12;
        let sub = Subspace::random(d, 5, &mut rng).unwrap();
        let net = TwoLayerNet::init(d, 10, 1.0 / (d as f64).sqrt(), &mut rng).unwrap();
        let x0 = sub.sample_on_p(2.0, &mut rng).unwrap();
        let y0 = if net.forward(x0.view()).unwrap() >= 0.0 { 1.0 } else { -1.0 };
        for (mode, fixed_part) in [(PgdMode::OntoP, Part::Perp), (PgdMode::OntoPerp, Part::P)] {
            let res = pgd_attack(&net, &sub, x0.view(), y0, mode, 0.05, 40).unwrap();
            let leak = sub.project(res.perturbation.view(), fixed_part).unwrap();
            let leak_norm = linalg::norm(&leak.view());
            let delta_norm = res.moved_norm.max(1e-300);
            assert!(
                leak_norm <= 1e-9 * delta_norm.max(1.0),
                "{mode}: leaked {leak_norm} into the fixed part"
            );
        }
    }

    #[test]
    fn pgd_handles_trivial_and_invalid_inputs() {
        let (net, sub) = hand_net();
        // Already misclassified for y₀ = −1 (N(x₀) > 0): zero iterations.
        let x0 = array![2.0, 0.0, 0.0, 0.0];
        let res =
            pgd_attack(&net, &sub, x0.view(), -1.0, PgdMode::Unprojected, 0.01, 100).unwrap();
        assert_eq!(res.iterations_used, 0);
        assert!(res.flipped);
        assert_eq!(res.moved_norm, 0.0);
        // Budget exhausted: no flip within one tiny step.
        let res =
            pgd_attack(&net, &sub, x0.view(), 1.0, PgdMode::Unprojected, 1e-6, 1).unwrap();
        assert_eq!(res.iterations_used, 1);
        assert!(!res.flipped);
        // Weights entirely inside P ⇒ the onto-perp direction vanishes ⇒
        // the attack reports itself stuck instead of erroring.
        let flat = TwoLayerNet::from_parts(array![[1.0, 0.0, 0.0, 0.0]], &[1], 1.0).unwrap();
        let far = array![5.0, 0.0, 0.0, 0.0];
        let res = pgd_attack(&flat, &sub, far.view(), 1.0, PgdMode::OntoPerp, 0.1, 50).unwrap();
        assert!(!res.flipped);
        assert_eq!(res.iterations_used, 0);
        assert_eq!(res.final_output, 5.0);
        // Bad parameters.
        assert!(pgd_attack(&net, &sub, x0.view(), 0.5, PgdMode::Unprojected, 0.01, 10).is_err());
        assert!(pgd_attack(&net, &sub, x0.view(), 1.0, PgdMode::Unprojected, 0.0, 10).is_err());
        // Mode parsing accepts spec spellings and kebab-case.
        assert_eq!("unprojected".parse::<PgdMode>().unwrap(), PgdMode::Unprojected);
        assert_eq!("onto_P".parse::<PgdMode>().unwrap(), PgdMode::OntoP);
        assert_eq!("onto_P_perp".parse::<PgdMode>().unwrap(), PgdMode::OntoPerp);
        assert_eq!("onto-perp".parse::<PgdMode>().unwrap(), PgdMode::OntoPerp);
        assert!("sideways".parse::<PgdMode>().is_err());
        assert!((default_pgd_step(3.0) - 0.003).abs() < 1e-15);
    }
}
