//! The two-layer ReLU model under study.
//!
//! `N(x) = Σᵢ uᵢ σ(⟨wᵢ, x⟩)` with `σ(z) = max(z, 0)`, width `m`, inputs in
//! ℝᵈ. The second layer is frozen at initialization to fair ±1 coin flips
//! scaled by `1/√m`; only the first-layer rows `wᵢ` ever train. There are no
//! biases. The subgradient convention at the kink is `σ'(0) = 1`, used
//! consistently in the forward/backward passes and in the active-set
//! bookkeeping ([`ActiveSplit`]), so "active" always means `⟨wᵢ, x⟩ ≥ 0`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::rng::SeededRng;

/// Logistic loss `L(q) = log(1 + e^{−q})`, evaluated without overflow.
pub fn logistic_loss(q: f64) -> f64 {
    if q > 0.0 {
        (-q).exp().ln_1p()
    } else {
        -q + q.exp().ln_1p()
    }
}

/// Derivative `L'(q) = −1/(1 + e^{q})`.
///
/// Monotone in `(−1, 0)`; large positive `q` underflows cleanly to `−0.0`
/// (via `e^q → ∞`) and large negative `q` saturates at `−1.0`.
pub fn logistic_loss_grad(q: f64) -> f64 {
    -1.0 / (1.0 + q.exp())
}

/// Active-neuron bookkeeping at a point `x₀` with candidate label `y₀`.
///
/// `S = {i : ⟨wᵢ, x₀⟩ ≥ 0}` is split by the sign of `uᵢ`; `k_y0` counts the
/// active neurons whose `uᵢ` sign *opposes* `y₀` — the ones the closed-form
/// perturbation leans on.
#[derive(Debug, Clone)]
pub struct ActiveSplit {
    /// Indices of active neurons, ascending.
    pub s: Vec<usize>,
    /// `|S|`.
    pub k: usize,
    /// Active indices with `uᵢ > 0`.
    pub i_plus: Vec<usize>,
    /// Active indices with `uᵢ < 0`.
    pub i_minus: Vec<usize>,
    /// `|i_plus|`.
    pub k_plus: usize,
    /// `|i_minus|`.
    pub k_minus: usize,
    /// `k₋` if `y₀ = +1`, else `k₊`.
    pub k_y0: usize,
}

/// Width-`m` two-layer ReLU network on ℝᵈ with frozen ±1/√m second layer.
#[derive(Debug, Clone)]
pub struct TwoLayerNet {
    d: usize,
    m: usize,
    /// First-layer weights, row `i` is `wᵢ` (shape `m × d`).
    weights: Array2<f64>,
    /// Second layer, each entry exactly `±1/√m`.
    u: Array1<f64>,
    /// The `σ` of the `N(0, β²)` entry-wise init this net was created with.
    beta: f64,
}

/// On-disk form: `u` stored as bare signs, `w` row-major.
#[derive(Serialize, Deserialize)]
struct NetworkDto {
    d: usize,
    m: usize,
    beta: f64,
    u_signs: Vec<i8>,
    w: Vec<f64>,
}

impl TwoLayerNet {
    /// Fresh network: `wᵢⱼ ~ N(0, β²)` i.i.d. (drawn row-major), then `m`
    /// fair sign flips for `u`. The draw order is part of the reproducibility
    /// contract.
    pub fn init(d: usize, m: usize, beta: f64, rng: &mut SeededRng) -> Result<TwoLayerNet> {
        if d == 0 || m == 0 {
            return Err(Error::InvalidParam(format!(
                "network needs d ≥ 1 and m ≥ 1, got d = {d}, m = {m}"
            )));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "init scale must be positive and finite, got beta = {beta}"
            )));
        }
        let weights = rng.gaussian_matrix(m, d, beta)?;
        let scale = 1.0 / (m as f64).sqrt();
        let mut u = Array1::zeros(m);
        for ui in u.iter_mut() {
            *ui = rng.sign() * scale;
        }
        Ok(TwoLayerNet {
            d,
            m,
            weights,
            u,
            beta,
        })
    }

    /// Rebuild from parts (deserialization, tests). `u_signs` must be ±1.
    pub fn from_parts(weights: Array2<f64>, u_signs: &[i8], beta: f64) -> Result<TwoLayerNet> {
        let (m, d) = weights.dim();
        if m == 0 || d == 0 {
            return Err(Error::InvalidParam("network needs m ≥ 1, d ≥ 1".into()));
        }
        if u_signs.len() != m {
            return Err(dim_err("TwoLayerNet::from_parts", m, u_signs.len()));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParam(format!("bad beta: {beta}")));
        }
        let scale = 1.0 / (m as f64).sqrt();
        let mut u = Array1::zeros(m);
        for (ui, s) in u.iter_mut().zip(u_signs) {
            match s {
                1 => *ui = scale,
                -1 => *ui = -scale,
                other => {
                    return Err(Error::InvalidParam(format!(
                        "u_signs entries must be ±1, got {other}"
                    )))
                }
            }
        }
        Ok(TwoLayerNet {
            d,
            m,
            weights,
            u,
            beta,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Init scale this network was created with.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// First-layer weight rows (`m × d`).
    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    /// Mutable first-layer weights (the trainer's handle).
    pub(crate) fn weights_mut(&mut self) -> &mut Array2<f64> {
        &mut self.weights
    }

    /// Frozen second layer (entries exactly `±1/√m`).
    pub fn u(&self) -> ArrayView1<'_, f64> {
        self.u.view()
    }

    /// Second-layer signs as ±1.
    pub fn u_signs(&self) -> Vec<i8> {
        self.u.iter().map(|x| if *x > 0.0 { 1 } else { -1 }).collect()
    }

    /// Pre-activations `W x` (length `m`).
    pub fn preactivations(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.d {
            return Err(dim_err("TwoLayerNet::preactivations", self.d, x.len()));
        }
        Ok(self.weights.dot(&x))
    }

    /// `N(x)`.
    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        let pre = self.preactivations(x)?;
        Ok(pre
            .iter()
            .zip(self.u.iter())
            .map(|(z, ui)| ui * z.max(0.0))
            .sum())
    }

    /// `N(xⱼ)` for every row of `points` (`r × d`), as one GEMM.
    pub fn forward_batch(&self, points: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if points.ncols() != self.d {
            return Err(dim_err("TwoLayerNet::forward_batch", self.d, points.ncols()));
        }
        let pre = points.dot(&self.weights.t()); // r × m
        Ok(pre.mapv(|z| z.max(0.0)).dot(&self.u))
    }

    /// Input gradient `(∂N/∂x)(x) = Σ_{i: ⟨wᵢ,x⟩ ≥ 0} uᵢ wᵢ` (σ'(0) = 1).
    pub fn input_gradient(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let pre = self.preactivations(x)?;
        let coeff: Array1<f64> = pre
            .iter()
            .zip(self.u.iter())
            .map(|(z, ui)| if *z >= 0.0 { *ui } else { 0.0 })
            .collect();
        Ok(self.weights.t().dot(&coeff))
    }

    /// Per-sample first-layer gradient of the logistic loss `L(y·N(x))`:
    /// row `i` is `L'(y N(x)) · y · uᵢ · 1[⟨wᵢ,x⟩ ≥ 0] · x` (shape `m × d`).
    pub fn param_gradient(&self, x: ArrayView1<'_, f64>, y: f64) -> Result<Array2<f64>> {
        check_label(y)?;
        let pre = self.preactivations(x)?;
        let n = pre
            .iter()
            .zip(self.u.iter())
            .map(|(z, ui)| ui * z.max(0.0))
            .sum::<f64>();
        let c = logistic_loss_grad(y * n) * y;
        let mut grad = Array2::zeros((self.m, self.d));
        for i in 0..self.m {
            if pre[i] >= 0.0 {
                let gi = c * self.u[i];
                grad.row_mut(i).assign(&x.mapv(|xi| gi * xi));
            }
        }
        Ok(grad)
    }

    /// Active-set split at `(x₀, y₀)`; `y₀ ∈ {−1, +1}`.
    pub fn active_split(&self, x0: ArrayView1<'_, f64>, y0: f64) -> Result<ActiveSplit> {
        check_label(y0)?;
        let pre = self.preactivations(x0)?;
        let mut s = Vec::new();
        let mut i_plus = Vec::new();
        let mut i_minus = Vec::new();
        for i in 0..self.m {
            if pre[i] >= 0.0 {
                s.push(i);
                if self.u[i] > 0.0 {
                    i_plus.push(i);
                } else {
                    i_minus.push(i);
                }
            }
        }
        let (k, k_plus, k_minus) = (s.len(), i_plus.len(), i_minus.len());
        let k_y0 = if y0 > 0.0 { k_minus } else { k_plus };
        Ok(ActiveSplit {
            s,
            k,
            i_plus,
            i_minus,
            k_plus,
            k_minus,
            k_y0,
        })
    }

    /// Dataset margin `minⱼ yⱼ N(xⱼ)`.
    pub fn margin(&self, points: ArrayView2<'_, f64>, labels: ArrayView1<'_, f64>) -> Result<f64> {
        if points.nrows() == 0 {
            return Err(Error::Degenerate("margin of an empty dataset".into()));
        }
        if points.nrows() != labels.len() {
            return Err(dim_err("TwoLayerNet::margin", points.nrows(), labels.len()));
        }
        let outputs = self.forward_batch(points)?;
        Ok(outputs
            .iter()
            .zip(labels.iter())
            .map(|(n, y)| y * n)
            .fold(f64::INFINITY, f64::min))
    }

    /// Serialize to the interchange JSON object
    /// `{"d", "m", "beta", "u_signs", "w"}` (`w` row-major; the `1/√m` factor
    /// of `u` is implied by `m`, not stored).
    pub fn to_json(&self) -> Result<String> {
        let dto = NetworkDto {
            d: self.d,
            m: self.m,
            beta: self.beta,
            u_signs: self.u_signs(),
            w: self.weights.iter().copied().collect(),
        };
        Ok(serde_json::to_string(&dto)?)
    }

    /// Parse the interchange JSON, validating shapes and sign entries.
    pub fn from_json(s: &str) -> Result<TwoLayerNet> {
        let dto: NetworkDto = serde_json::from_str(s)?;
        if dto.w.len() != dto.d * dto.m {
            return Err(dim_err(
                "TwoLayerNet::from_json",
                format!("{} weights", dto.d * dto.m),
                dto.w.len(),
            ));
        }
        let weights = Array2::from_shape_vec((dto.m, dto.d), dto.w).expect("length checked");
        TwoLayerNet::from_parts(weights, &dto.u_signs, dto.beta)
    }

    /// Write [`TwoLayerNet::to_json`] to a file.
    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Read and validate a network JSON file.
    pub fn read_json(path: &std::path::Path) -> Result<TwoLayerNet> {
        TwoLayerNet::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Labels live in {−1, +1}.
pub(crate) fn check_label(y: f64) -> Result<()> {
    if y == 1.0 || y == -1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("label must be ±1, got {y}")))
    }
}

/// Mean squared row norm helper used by init diagnostics: `‖wᵢ‖²` for each row.
pub fn row_sq_norms(w: ArrayView2<'_, f64>) -> Array1<f64> {
    w.axis_iter(Axis(0)).map(|r| r.dot(&r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Net with w₁ = e₁ (u = +1/√2), w₂ = e₂ (u = −1/√2).
    fn tiny_net() -> TwoLayerNet {
        let w = array![[1.0, 0.0], [0.0, 1.0]];
        TwoLayerNet::from_parts(w, &[1, -1], 0.5).unwrap()
    }

    #[test]
    fn forward_matches_hand_computation() {
        let net = tiny_net();
        let s = 1.0 / 2.0f64.sqrt();
        // N(x) = (σ(x₁) − σ(x₂))/√2.
        assert!((net.forward(array![1.0, 1.0].view()).unwrap() - 0.0).abs() < 1e-15);
        assert!((net.forward(array![2.0, 1.0].view()).unwrap() - s).abs() < 1e-15);
        assert!((net.forward(array![-3.0, 1.0].view()).unwrap() + s).abs() < 1e-15);
        // Both neurons inactive: output 0 (σ'(0) = 1 has no effect on value).
        assert_eq!(net.forward(array![-1.0, -2.0].view()).unwrap(), 0.0);
    }

    #[test]
    fn u_magnitudes_are_exactly_inv_sqrt_m() {
        let mut rng = SeededRng::new(77);
        for m in [1usize, 2, 3, 7, 32, 100] {
            let net = TwoLayerNet::init(5, m, 0.3, &mut rng).unwrap();
            let want = 1.0 / (m as f64).sqrt();
            for ui in net.u().iter() {
                assert_eq!(ui.abs().to_bits(), want.to_bits());
            }
        }
    }

    #[test]
    fn init_row_norms_concentrate() {
        // P(‖w₁‖² ∈ [β²d/2, 2β²d]) ≥ 1 − 2e^{−d/16}; at d = 64 that is
        // ≈ 0.963, and the true value is ≈ 0.9997, so 500 seeds clear the
        // bound with huge slack.
        let d = 64;
        let beta = 0.17;
        let mut hits = 0;
        for seed in 0..500 {
            let mut rng = SeededRng::new(seed);
            let net = TwoLayerNet::init(d, 3, beta, &mut rng).unwrap();
            let sq = row_sq_norms(net.weights())[0];
            let scale = beta * beta * d as f64;
            if sq >= 0.5 * scale && sq <= 2.0 * scale {
                hits += 1;
            }
        }
        let bound = 1.0 - 2.0 * (-(64.0f64) / 16.0).exp();
        assert!(
            (hits as f64) / 500.0 >= bound,
            "hits = {hits}, need ≥ {}",
            (bound * 500.0).ceil()
        );
    }

    #[test]
    fn u_sign_mean_is_clt_small() {
        let mut rng = SeededRng::new(99);
        let net = TwoLayerNet::init(2, 10_000, 1.0, &mut rng).unwrap();
        let mean: f64 = net.u_signs().iter().map(|s| *s as f64).sum::<f64>() / 10_000.0;
        assert!(mean.abs() < 4.0 / 100.0, "sign mean = {mean}");
    }

    #[test]
    fn input_gradient_matches_central_differences() {
        let mut rng = SeededRng::new(12);
        let net = TwoLayerNet::init(7, 5, 0.8, &mut rng).unwrap();
        // Pick a probe point safely away from every activation boundary so
        // the finite-difference stencil stays on one linear piece.
        let x = loop {
            let cand = rng.gaussian_vector(7, 1.0).unwrap();
            let pre = net.preactivations(cand.view()).unwrap();
            if pre.iter().all(|z| z.abs() > 1e-3) {
                break cand;
            }
        };
        let grad = net.input_gradient(x.view()).unwrap();
        let h = 1e-5;
        for j in 0..7 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let fd = (net.forward(xp.view()).unwrap() - net.forward(xm.view()).unwrap()) / (2.0 * h);
            assert!(
                (fd - grad[j]).abs() < 1e-6,
                "coord {j}: fd = {fd}, analytic = {}",
                grad[j]
            );
        }
    }

    #[test]
    fn param_gradient_matches_central_differences() {
        let mut rng = SeededRng::new(23);
        let net = TwoLayerNet::init(6, 4, 0.9, &mut rng).unwrap();
        let x = loop {
            let cand = rng.gaussian_vector(6, 1.0).unwrap();
            let pre = net.preactivations(cand.view()).unwrap();
            if pre.iter().all(|z| z.abs() > 1e-3) {
                break cand;
            }
        };
        for y in [1.0, -1.0] {
            let grad = net.param_gradient(x.view(), y).unwrap();
            let h = 1e-5;
            for i in 0..4 {
                for j in 0..6 {
                    let mut wp = net.clone();
                    let mut wm = net.clone();
                    wp.weights_mut()[[i, j]] += h;
                    wm.weights_mut()[[i, j]] -= h;
                    let lp = logistic_loss(y * wp.forward(x.view()).unwrap());
                    let lm = logistic_loss(y * wm.forward(x.view()).unwrap());
                    let fd = (lp - lm) / (2.0 * h);
                    assert!(
                        (fd - grad[[i, j]]).abs() < 1e-6,
                        "({i},{j}) y={y}: fd = {fd}, analytic = {}",
                        grad[[i, j]]
                    );
                }
            }
        }
    }

    #[test]
    fn active_split_matches_brute_force_recount() {
        let mut rng = SeededRng::new(31);
        let net = TwoLayerNet::init(9, 24, 0.5, &mut rng).unwrap();
        let x = rng.gaussian_vector(9, 1.3).unwrap();
        for y0 in [1.0, -1.0] {
            let split = net.active_split(x.view(), y0).unwrap();
            let pre = net.preactivations(x.view()).unwrap();
            let mut k = 0;
            let mut kp = 0;
            let mut km = 0;
            for i in 0..24 {
                if pre[i] >= 0.0 {
                    k += 1;
                    if net.u()[i] > 0.0 {
                        kp += 1;
                    } else {
                        km += 1;
                    }
                }
            }
            assert_eq!(split.k, k);
            assert_eq!(split.k_plus, kp);
            assert_eq!(split.k_minus, km);
            assert_eq!(split.k, split.k_plus + split.k_minus);
            assert_eq!(split.k_y0, if y0 > 0.0 { km } else { kp });
            assert_eq!(split.s.len(), k);
            assert!(split.s.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(net.active_split(x.view(), 0.5).is_err());
    }

    #[test]
    fn margin_matches_brute_force_min() {
        let mut rng = SeededRng::new(41);
        let net = TwoLayerNet::init(5, 8, 1.0, &mut rng).unwrap();
        let pts = rng.gaussian_matrix(12, 5, 1.0).unwrap();
        let labels: Array1<f64> = (0..12).map(|i| if i % 3 == 0 { -1.0 } else { 1.0 }).collect();
        let got = net.margin(pts.view(), labels.view()).unwrap();
        let mut want = f64::INFINITY;
        for j in 0..12 {
            want = want.min(labels[j] * net.forward(pts.row(j)).unwrap());
        }
        // Batched GEMM and a per-row dot may sum in different orders.
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
        let empty = Array2::<f64>::zeros((0, 5));
        assert!(net.margin(empty.view(), Array1::zeros(0).view()).is_err());
    }

    #[test]
    fn forward_batch_equals_per_sample_loop() {
        let mut rng = SeededRng::new(52);
        let net = TwoLayerNet::init(11, 6, 0.7, &mut rng).unwrap();
        let pts = rng.gaussian_matrix(9, 11, 2.0).unwrap();
        let batch = net.forward_batch(pts.view()).unwrap();
        for j in 0..9 {
            let single = net.forward(pts.row(j)).unwrap();
            assert!((batch[j] - single).abs() < 1e-12);
        }
    }

    #[test]
    fn logistic_loss_is_stable_at_extremes() {
        assert_eq!(logistic_loss(800.0), 0.0);
        assert_eq!(logistic_loss(-800.0), 800.0);
        assert!((logistic_loss(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(logistic_loss_grad(800.0), -0.0);
        assert_eq!(logistic_loss_grad(-800.0), -1.0);
        assert!((logistic_loss_grad(0.0) + 0.5).abs() < 1e-15);
        for q in [-30.0, -1.0, 0.0, 1.0, 30.0] {
            let h = 1e-6;
            let fd = (logistic_loss(q + h) - logistic_loss(q - h)) / (2.0 * h);
            assert!((fd - logistic_loss_grad(q)).abs() < 1e-8);
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact_and_validating() {
        let mut rng = SeededRng::new(61);
        let net = TwoLayerNet::init(4, 3, 0.25, &mut rng).unwrap();
        let json = net.to_json().unwrap();
        let back = TwoLayerNet::from_json(&json).unwrap();
        assert_eq!(net.d(), back.d());
        assert_eq!(net.m(), back.m());
        assert_eq!(net.beta().to_bits(), back.beta().to_bits());
        assert_eq!(net.u_signs(), back.u_signs());
        for (a, b) in net.weights().iter().zip(back.weights().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // Corrupt sign entry.
        let bad = json.replacen("1", "2", 1);
        assert!(TwoLayerNet::from_json(&bad).is_err());
        assert!(TwoLayerNet::from_json("{\"d\":2,\"m\":1,\"beta\":0.1,\"u_signs\":[1],\"w\":[0.0]}").is_err());
    }

    #[test]
    fn init_rejects_bad_params() {
        let mut rng = SeededRng::new(1);
        assert!(TwoLayerNet::init(0, 3, 0.1, &mut rng).is_err());
        assert!(TwoLayerNet::init(3, 0, 0.1, &mut rng).is_err());
        assert!(TwoLayerNet::init(3, 3, 0.0, &mut rng).is_err());
        assert!(TwoLayerNet::init(3, 3, -0.5, &mut rng).is_err());
        assert!(TwoLayerNet::init(3, 3, f64::INFINITY, &mut rng).is_err());
    }
}
