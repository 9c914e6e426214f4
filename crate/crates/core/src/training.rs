//! First-layer training with off-subspace drift monitoring.
//!
//! The trainer minimizes the logistic loss `Σⱼ L(yⱼ·N(xⱼ))` (sum by default,
//! mean behind a flag) over the first-layer weights only, by full-batch
//! gradient descent or without-replacement mini-batch SGD, with optional L₂
//! regularization applied to the first layer:
//!
//! ```text
//! W ← (1 − ηλ)·W − η·∇_W L(batch)
//! ```
//!
//! Every recorded step captures the loss, the dataset margin
//! `minⱼ yⱼ N(xⱼ)`, the step-gradient norm, and the `freeze_residual`
//! `maxᵢ ‖Π_{P⊥}wᵢ⁽ᵗ⁾ − (1 − ηλ)ᵗ·Π_{P⊥}wᵢ⁽⁰⁾‖` — the distance from the
//! exact closed-form law the off-subspace components must follow when the
//! data lies on `P`: frozen for λ = 0, uniform geometric decay for λ > 0,
//! for *any* batch order.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis};

use crate::data::LabeledDataset;
use crate::error::{dim_err, Error, Result};
use crate::geometry::{Part, Subspace};
use crate::linalg;
use crate::network::{logistic_loss, logistic_loss_grad, TwoLayerNet};
use crate::rng::SeededRng;
use crate::tol;

/// Gradient batch size per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSize {
    /// One step = one pass over the whole dataset (deterministic GD).
    Full,
    /// Without-replacement mini-batches of this size, reshuffled per epoch.
    Size(usize),
}

/// Trainer configuration.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Learning rate `η > 0`.
    pub eta: f64,
    /// L₂ coefficient `λ ≥ 0` on the first layer; `ηλ < 1` required when
    /// `λ > 0` (otherwise the decay law is meaningless or unstable).
    pub lambda: f64,
    /// Maximum number of update steps `T`.
    pub max_steps: usize,
    /// Stop at the first step whose dataset margin reaches this value.
    pub target_margin: Option<f64>,
    /// Full-batch GD or mini-batch SGD.
    pub batch_size: BatchSize,
    /// Seed for the SGD batch schedule (full-batch runs never consume it).
    pub seed: u64,
    /// Record every `trace_stride`-th step (the final step is always kept).
    pub trace_stride: usize,
    /// Divide the loss (and gradients) by the batch size instead of summing.
    pub average_loss: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 0.05,
            lambda: 0.0,
            max_steps: 1000,
            target_margin: None,
            batch_size: BatchSize::Full,
            seed: 0,
            trace_stride: 1,
            average_loss: false,
        }
    }
}

impl TrainConfig {
    /// Check the parameter ranges documented on the fields.
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParam(format!("eta must be > 0, got {}", self.eta)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "lambda must be ≥ 0, got {}",
                self.lambda
            )));
        }
        if self.lambda > 0.0 && self.eta * self.lambda >= 1.0 {
            return Err(Error::InvalidParam(format!(
                "eta·lambda must be < 1 for the decay law, got {}",
                self.eta * self.lambda
            )));
        }
        if self.trace_stride == 0 {
            return Err(Error::InvalidParam("trace_stride must be ≥ 1".into()));
        }
        if let Some(t) = self.target_margin {
            if !t.is_finite() {
                return Err(Error::InvalidParam(format!("target_margin must be finite, got {t}")));
            }
        }
        if let BatchSize::Size(b) = self.batch_size {
            if b == 0 {
                return Err(Error::InvalidParam("batch size must be ≥ 1".into()));
            }
        }
        Ok(())
    }
}

/// One recorded training step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    /// Data-term loss over the full dataset (sum, or mean if configured).
    pub loss: f64,
    /// `minⱼ yⱼ N(xⱼ)` over the full dataset.
    pub margin: f64,
    /// `maxᵢ ‖Π_{P⊥}wᵢ⁽ᵗ⁾ − (1−ηλ)ᵗ Π_{P⊥}wᵢ⁽⁰⁾‖`.
    pub freeze_residual: f64,
    /// Frobenius norm of the step's full gradient (data + regularization).
    pub grad_norm: f64,
}

/// The recorded training trajectory.
#[derive(Debug, Clone, Default)]
pub struct TrainTrace {
    pub rows: Vec<TraceRow>,
}

const TRACE_HEADER: &str = "step,loss,margin,freeze_residual,grad_norm";

impl TrainTrace {
    /// Render the trace CSV (header + one row per recorded step; floats in
    /// shortest round-trip form).
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.step, r.loss, r.margin, r.freeze_residual, r.grad_norm
            ));
        }
        out
    }

    /// Write [`TrainTrace::to_csv_string`] to a file.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    /// Parse a trace CSV produced by [`TrainTrace::write_csv`].
    pub fn read_csv(path: &std::path::Path) -> Result<TrainTrace> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim_end() == TRACE_HEADER => {}
            Some((_, h)) => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected header '{TRACE_HEADER}', got '{h}'"),
                })
            }
            None => {
                return Err(Error::Parse {
                    line: 1,
                    msg: "empty trace file".into(),
                })
            }
        }
        let mut rows = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected 5 fields, got {}", fields.len()),
                });
            }
            let parse_f = |s: &str, what: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("{what} '{s}' is not a float"),
                })
            };
            rows.push(TraceRow {
                step: fields[0].parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("step '{}' is not an integer", fields[0]),
                })?,
                loss: parse_f(fields[1], "loss")?,
                margin: parse_f(fields[2], "margin")?,
                freeze_residual: parse_f(fields[3], "freeze_residual")?,
                grad_norm: parse_f(fields[4], "grad_norm")?,
            });
        }
        Ok(TrainTrace { rows })
    }

    /// Largest freeze residual over all recorded steps.
    pub fn max_freeze_residual(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.freeze_residual)
            .fold(0.0, f64::max)
    }

    /// The final recorded row (the trace is never empty after training).
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }
}

/// Train `net` on `data` confined to `subspace`.
///
/// Returns the trained network and the recorded trace. `max_steps = 0` is a
/// no-op that still records the initial state. Fails if any data point is off
/// the subspace, if dimensions disagree, or if the loss diverges (exceeds
/// [`tol::DIVERGENCE_LOSS`] or turns non-finite).
pub fn train(
    net: TwoLayerNet,
    data: &LabeledDataset,
    subspace: &Subspace,
    cfg: &TrainConfig,
) -> Result<(TwoLayerNet, TrainTrace)> {
    cfg.validate()?;
    let (d, m, r) = (net.d(), net.m(), data.len());
    if data.d() != d {
        return Err(dim_err("train: data vs net", d, data.d()));
    }
    if subspace.d() != d {
        return Err(dim_err("train: subspace vs net", d, subspace.d()));
    }
    let off = subspace.project_rows(data.points(), Part::Perp)?;
    for (index, (row, x)) in off.outer_iter().zip(data.points().outer_iter()).enumerate() {
        let residual = linalg::norm(&row);
        if residual > tol::ON_SUBSPACE * linalg::norm(&x).max(1.0) {
            return Err(Error::OffSubspace { index, residual });
        }
    }

    let mut net = net;
    let points = data.points();
    let labels = data.labels();
    let u = net.u().to_owned();
    let w_hat0 = subspace.project_rows(net.weights(), Part::Perp)?;
    let decay = 1.0 - cfg.eta * cfg.lambda;

    let batch = match cfg.batch_size {
        BatchSize::Full => r,
        BatchSize::Size(b) => b.min(r),
    };
    let full_batch = batch == r && matches!(cfg.batch_size, BatchSize::Full);
    let batches_per_epoch = r.div_ceil(batch);
    let mut sgd_rng = SeededRng::new(crate::rng::child_seed(cfg.seed, "sgd-shuffle", 0));
    let mut perm: Vec<usize> = (0..r).collect();

    let mut pre = Array2::<f64>::zeros((r, m));
    let mut coeff = Array2::<f64>::zeros((r, m));
    let mut grad = Array2::<f64>::zeros((m, d));
    let mut trace = TrainTrace::default();

    let mut t = 0usize;
    loop {
        // Full-data forward pass: monitors always see the whole dataset.
        general_mat_mul(1.0, &points, &net.weights().t(), 0.0, &mut pre);
        let mut loss = 0.0;
        let mut margin = f64::INFINITY;
        let mut outputs = Array1::<f64>::zeros(r);
        for j in 0..r {
            let n_j: f64 = pre
                .row(j)
                .iter()
                .zip(u.iter())
                .map(|(z, ui)| ui * z.max(0.0))
                .sum();
            outputs[j] = n_j;
            let q = labels[j] * n_j;
            loss += logistic_loss(q);
            margin = margin.min(q);
        }
        if cfg.average_loss {
            loss /= r as f64;
        }
        if !loss.is_finite() || loss > tol::DIVERGENCE_LOSS {
            return Err(Error::Diverged { step: t, loss });
        }

        // Step gradient (the whole dataset for GD, the scheduled batch for SGD).
        let (grad_view, batch_len): (&Array2<f64>, usize) = if full_batch {
            coeff.fill(0.0);
            for j in 0..r {
                let c = logistic_loss_grad(labels[j] * outputs[j]) * labels[j];
                for i in 0..m {
                    if pre[[j, i]] >= 0.0 {
                        coeff[[j, i]] = c;
                    }
                }
            }
            general_mat_mul(1.0, &coeff.t(), &points, 0.0, &mut grad);
            for i in 0..m {
                let ui = u[i];
                grad.row_mut(i).mapv_inplace(|g| g * ui);
            }
            (&grad, r)
        } else {
            let slot = t % batches_per_epoch;
            if slot == 0 {
                perm = sgd_rng.shuffled_indices(r);
            }
            let idx = &perm[slot * batch..((slot + 1) * batch).min(r)];
            let px = points.select(Axis(0), idx);
            let mut bcoeff = Array2::<f64>::zeros((idx.len(), m));
            for (bj, j) in idx.iter().enumerate() {
                let c = logistic_loss_grad(labels[*j] * outputs[*j]) * labels[*j];
                for i in 0..m {
                    if pre[[*j, i]] >= 0.0 {
                        bcoeff[[bj, i]] = c;
                    }
                }
            }
            general_mat_mul(1.0, &bcoeff.t(), &px, 0.0, &mut grad);
            for i in 0..m {
                let ui = u[i];
                grad.row_mut(i).mapv_inplace(|g| g * ui);
            }
            (&grad, idx.len())
        };
        let norm_scale = if cfg.average_loss {
            1.0 / batch_len as f64
        } else {
            1.0
        };

        // Full step direction norm: ‖norm_scale·G + λW‖_F.
        let mut gsq = 0.0;
        for (g, w) in grad_view.iter().zip(net.weights().iter()) {
            let step_g = norm_scale * g + cfg.lambda * w;
            gsq += step_g * step_g;
        }
        let grad_norm = gsq.sqrt();

        let reached_target = cfg.target_margin.map(|g| margin >= g).unwrap_or(false);
        let stop = t == cfg.max_steps || reached_target;
        if t % cfg.trace_stride == 0 || stop {
            let w_hat = subspace.project_rows(net.weights(), Part::Perp)?;
            let factor = decay.powi(t as i32);
            let mut residual = 0.0f64;
            for (row_t, row_0) in w_hat.outer_iter().zip(w_hat0.outer_iter()) {
                let mut sq = 0.0;
                for (a, b) in row_t.iter().zip(row_0.iter()) {
                    let diff = a - factor * b;
                    sq += diff * diff;
                }
                residual = residual.max(sq.sqrt());
            }
            trace.rows.push(TraceRow {
                step: t,
                loss,
                margin,
                freeze_residual: residual,
                grad_norm,
            });
        }
        if stop {
            break;
        }

        // W ← (1 − ηλ)·W − η·(scaled data gradient).
        let eta_eff = cfg.eta * norm_scale;
        ndarray::Zip::from(net.weights_mut())
            .and(grad_view)
            .for_each(|w, g| *w = decay * *w - eta_eff * g);
        t += 1;
    }

    Ok((net, trace))
}

/// Margin-growth diagnostics against the `ln²(d)` saturation threshold.
#[derive(Debug, Clone)]
pub struct MarginGrowthReport {
    /// `ln²(d)` (natural log).
    pub threshold: f64,
    /// Largest recorded margin.
    pub max_margin: f64,
    /// First recorded step whose margin reaches the threshold, if any.
    pub crossing_step: Option<usize>,
    /// Median per-row margin increment strictly before the crossing.
    pub pre_crossing_median_increment: Option<f64>,
    /// Median per-row margin increment from the crossing onward.
    pub post_crossing_median_increment: Option<f64>,
    /// Largest per-row margin increment from the crossing onward.
    pub post_crossing_max_increment: Option<f64>,
    /// First recorded step from which the margin stays within 1e-12 of its
    /// maximum for the remainder of the trace (needs ≥ 2 plateau rows).
    pub plateau_step: Option<usize>,
}

/// Analyze a training trace's margin column. `d` is the ambient dimension
/// that sets the `ln²(d)` threshold; the trace must contain at least one row.
pub fn margin_growth_report(trace: &TrainTrace, d: usize) -> Result<MarginGrowthReport> {
    if trace.rows.is_empty() {
        return Err(Error::Degenerate("margin report needs a nonempty trace".into()));
    }
    if d < 2 {
        return Err(Error::InvalidParam(format!("threshold needs d ≥ 2, got {d}")));
    }
    let threshold = (d as f64).ln().powi(2);
    let margins: Vec<f64> = trace.rows.iter().map(|r| r.margin).collect();
    let max_margin = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cross_idx = margins.iter().position(|g| *g >= threshold);

    let increments: Vec<f64> = margins.windows(2).map(|w| w[1] - w[0]).collect();
    let median = |xs: &[f64]| -> Option<f64> {
        if xs.is_empty() {
            return None;
        }
        let mut v = xs.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let n = v.len();
        Some(if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        })
    };
    let (pre_med, post_med, post_max) = match cross_idx {
        Some(ci) => {
            // Increment i is the move rows[i] → rows[i+1]; it is "post" when
            // it starts at or after the crossing row.
            let pre: Vec<f64> = increments.iter().copied().take(ci).collect();
            let post: Vec<f64> = increments.iter().copied().skip(ci).collect();
            (
                median(&pre),
                median(&post),
                post.iter().copied().fold(None, |acc: Option<f64>, x| {
                    Some(acc.map_or(x, |a| a.max(x)))
                }),
            )
        }
        None => (None, None, None),
    };

    // Plateau: scan back for the last row strictly below max − eps.
    let eps = 1e-12 * max_margin.abs().max(1.0);
    let last_below = margins.iter().rposition(|g| *g < max_margin - eps);
    let plateau_start = match last_below {
        Some(i) => i + 1,
        None => 0,
    };
    let plateau_step = if margins.len() - plateau_start >= 2 {
        Some(trace.rows[plateau_start].step)
    } else {
        None
    };

    Ok(MarginGrowthReport {
        threshold,
        max_margin,
        crossing_step: cross_idx.map(|i| trace.rows[i].step),
        pre_crossing_median_increment: pre_med,
        post_crossing_median_increment: post_med,
        post_crossing_max_increment: post_max,
        plateau_step,
    })
}
