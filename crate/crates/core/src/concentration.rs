//! Monte-Carlo verification of the Gaussian concentration bounds.
//!
//! Six tail inequalities carry the whole theory — the gradient sandwich, the
//! perturbation norm bound, and the flip guarantee all reduce to them:
//!
//! | id                   | event                                   | bound                        |
//! |----------------------|-----------------------------------------|------------------------------|
//! | `norm-lower`         | `‖w‖² ≤ σ²n/2`                          | `e^{−n/16}`                  |
//! | `sum-norm-lower`     | `‖Σᵢ₌₁ᵐ wᵢ‖² ≤ mσ²n/2`                  | `e^{−n/16}`                  |
//! | `norm-upper`         | `‖w‖² ≥ 2σ²n`                           | `e^{−n/16}`                  |
//! | `sum-norm-upper`     | `‖Σᵢ₌₁ᵐ wᵢ‖² ≥ 2mσ²n`                   | `e^{−n/16}`                  |
//! | `inner-fixed`        | `|⟨u,v⟩| ≥ ‖u‖·t`, fixed `u`            | `2e^{−t²/2σ₂²}`              |
//! | `inner-two-gaussian` | `|⟨u,v⟩| ≥ σ₁√(2n)·t`                   | `e^{−n/16} + 2e^{−t²/2σ₂²}`  |
//!
//! (`w, wᵢ, u ~ N(0, σ₁²Iₙ)` and `v ~ N(0, σ₂²Iₙ)`, all independent.)
//!
//! Each tester draws the stated vectors afresh per trial and compares the
//! empirical tail frequency against the analytic bound plus Monte-Carlo
//! slack; where the event has a closed-form probability (a χ²ₙ or normal
//! tail) the unit tests pin the frequency to it as well.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::special::{chi2_cdf, normal_cdf};

/// Which tail inequality to exercise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemmaId {
    NormLower,
    SumNormLower,
    NormUpper,
    SumNormUpper,
    InnerFixed,
    InnerTwoGaussian,
}

impl LemmaId {
    /// All six, in table order.
    pub const ALL: [LemmaId; 6] = [
        LemmaId::NormLower,
        LemmaId::SumNormLower,
        LemmaId::NormUpper,
        LemmaId::SumNormUpper,
        LemmaId::InnerFixed,
        LemmaId::InnerTwoGaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LemmaId::NormLower => "norm-lower",
            LemmaId::SumNormLower => "sum-norm-lower",
            LemmaId::NormUpper => "norm-upper",
            LemmaId::SumNormUpper => "sum-norm-upper",
            LemmaId::InnerFixed => "inner-fixed",
            LemmaId::InnerTwoGaussian => "inner-two-gaussian",
        }
    }
}

impl fmt::Display for LemmaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LemmaId {
    type Err = Error;
    fn from_str(s: &str) -> Result<LemmaId> {
        LemmaId::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| {
                Error::InvalidParam(format!(
                    "unknown lemma '{s}' (norm-lower | sum-norm-lower | norm-upper | \
                     sum-norm-upper | inner-fixed | inner-two-gaussian)"
                ))
            })
    }
}

/// Parameters of one Monte-Carlo cell.
#[derive(Debug, Clone)]
pub struct TailParams {
    /// Vector dimension `n`.
    pub n: usize,
    /// Number of summands for the `sum-*` lemmas (ignored elsewhere).
    pub m: usize,
    /// Scale of `w`, `wᵢ`, `u`.
    pub sigma1: f64,
    /// Scale of `v` in the inner-product lemmas.
    pub sigma2: f64,
    /// Threshold `t` in the inner-product lemmas.
    pub t: f64,
    /// Monte-Carlo sample count.
    pub trials: usize,
}

impl Default for TailParams {
    fn default() -> Self {
        TailParams {
            n: 16,
            m: 8,
            sigma1: 1.0,
            sigma2: 1.0,
            t: 2.0,
            trials: 2000,
        }
    }
}

impl TailParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.trials == 0 {
            return Err(Error::InvalidParam(format!(
                "n, m, trials must be ≥ 1, got n = {}, m = {}, trials = {}",
                self.n, self.m, self.trials
            )));
        }
        for (name, v) in [("sigma1", self.sigma1), ("sigma2", self.sigma2), ("t", self.t)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParam(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Outcome of one Monte-Carlo cell.
#[derive(Debug, Clone)]
pub struct TailTestResult {
    pub lemma: LemmaId,
    pub params: TailParams,
    /// Trials on which the tail event fired.
    pub hits: usize,
    /// `hits / trials`.
    pub freq: f64,
    /// The analytic tail bound for this cell.
    pub bound: f64,
    /// Monte-Carlo allowance: `3·√(bound(1−bound)/trials) + 10/trials`.
    pub slack: f64,
    /// `freq ≤ bound + slack`.
    pub passed: bool,
}

/// The analytic tail bound of a lemma at these parameters.
pub fn tail_bound(lemma: LemmaId, p: &TailParams) -> f64 {
    let norm_part = (-(p.n as f64) / 16.0).exp();
    let inner_part = 2.0 * (-p.t * p.t / (2.0 * p.sigma2 * p.sigma2)).exp();
    match lemma {
        LemmaId::NormLower
        | LemmaId::SumNormLower
        | LemmaId::NormUpper
        | LemmaId::SumNormUpper => norm_part,
        LemmaId::InnerFixed => inner_part,
        LemmaId::InnerTwoGaussian => norm_part + inner_part,
    }
}

/// The exact probability of the tail event, where a closed form exists.
///
/// The four norm events are χ²ₙ tails (scale cancels); `inner-fixed` is a
/// scalar Gaussian tail. The two-Gaussian inner product has no elementary
/// closed form, so that lemma is checked against its bound only.
pub fn exact_tail_probability(lemma: LemmaId, p: &TailParams) -> Option<f64> {
    let n = p.n as f64;
    match lemma {
        LemmaId::NormLower | LemmaId::SumNormLower => Some(chi2_cdf(n, n / 2.0)),
        LemmaId::NormUpper | LemmaId::SumNormUpper => Some(1.0 - chi2_cdf(n, 2.0 * n)),
        LemmaId::InnerFixed => Some(2.0 * normal_cdf(-p.t / p.sigma2)),
        LemmaId::InnerTwoGaussian => None,
    }
}

/// `3·√(bound(1−bound)/trials) + 10/trials`: three binomial standard
/// deviations at the bound's own rate, plus a small-count floor.
pub fn monte_carlo_slack(bound: f64, trials: usize) -> f64 {
    let b = bound.clamp(0.0, 1.0);
    3.0 * (b * (1.0 - b) / trials as f64).sqrt() + 10.0 / trials as f64
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Run one Monte-Carlo cell with fresh draws per trial.
pub fn test_lemma(lemma: LemmaId, p: &TailParams, rng: &mut SeededRng) -> Result<TailTestResult> {
    p.validate()?;
    let n = p.n;
    let s1 = p.sigma1;
    let s2 = p.sigma2;
    // The fixed direction of `inner-fixed` is drawn once, before the trials.
    let u_fixed = if lemma == LemmaId::InnerFixed {
        Some(rng.gaussian_vector(n, s1)?)
    } else {
        None
    };
    let mut hits = 0usize;
    for _ in 0..p.trials {
        let hit = match lemma {
            LemmaId::NormLower => {
                let w = rng.gaussian_vector(n, s1)?;
                sq_norm(w.as_slice().unwrap()) <= 0.5 * s1 * s1 * n as f64
            }
            LemmaId::NormUpper => {
                let w = rng.gaussian_vector(n, s1)?;
                sq_norm(w.as_slice().unwrap()) >= 2.0 * s1 * s1 * n as f64
            }
            LemmaId::SumNormLower | LemmaId::SumNormUpper => {
                let mut s = rng.gaussian_vector(n, s1)?;
                for _ in 1..p.m {
                    s += &rng.gaussian_vector(n, s1)?;
                }
                let q = sq_norm(s.as_slice().unwrap());
                let scale = p.m as f64 * s1 * s1 * n as f64;
                if lemma == LemmaId::SumNormLower {
                    q <= 0.5 * scale
                } else {
                    q >= 2.0 * scale
                }
            }
            LemmaId::InnerFixed => {
                let u = u_fixed.as_ref().unwrap();
                let v = rng.gaussian_vector(n, s2)?;
                let inner: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                inner.abs() >= sq_norm(u.as_slice().unwrap()).sqrt() * p.t
            }
            LemmaId::InnerTwoGaussian => {
                let u = rng.gaussian_vector(n, s1)?;
                let v = rng.gaussian_vector(n, s2)?;
                let inner: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                inner.abs() >= s1 * (2.0 * n as f64).sqrt() * p.t
            }
        };
        if hit {
            hits += 1;
        }
    }
    let freq = hits as f64 / p.trials as f64;
    let bound = tail_bound(lemma, p);
    let slack = monte_carlo_slack(bound, p.trials);
    Ok(TailTestResult {
        lemma,
        params: p.clone(),
        hits,
        freq,
        bound,
        slack,
        passed: freq <= bound + slack,
    })
}

/// Run a lemma over a grid of cells; every cell gets its own child seed, so
/// the sweep is reproducible and insensitive to grid order.
pub fn sweep_lemma(
    lemma: LemmaId,
    cells: &[TailParams],
    seed: u64,
) -> Result<Vec<TailTestResult>> {
    let run_cell = |(i, p): (usize, &TailParams)| {
        let mut rng = SeededRng::new(crate::rng::child_seed(seed, lemma.name(), i as u64));
        test_lemma(lemma, p, &mut rng)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        cells.par_iter().enumerate().map(run_cell).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        cells.iter().enumerate().map(run_cell).collect()
    }
}

/// Build a lemma's Monte-Carlo grid from exactly the parameters that appear
/// in its statement; the others stay at neutral defaults. The norm lemmas
/// vary (n, σ₁); the sum lemmas add m; the fixed-vector inner-product lemma
/// varies (n, t, σ₂); the two-Gaussian one varies (n, t, σ₁, σ₂).
pub fn lemma_grid(
    lemma: LemmaId,
    ns: &[usize],
    ms: &[usize],
    ts: &[f64],
    sigmas: &[f64],
    trials: usize,
) -> Vec<TailParams> {
    let base = TailParams {
        trials,
        ..TailParams::default()
    };
    let mut cells = Vec::new();
    match lemma {
        LemmaId::NormLower | LemmaId::NormUpper => {
            for &n in ns {
                for &s1 in sigmas {
                    cells.push(TailParams {
                        n,
                        m: 1,
                        sigma1: s1,
                        ..base.clone()
                    });
                }
            }
        }
        LemmaId::SumNormLower | LemmaId::SumNormUpper => {
            for &n in ns {
                for &m in ms {
                    for &s1 in sigmas {
                        cells.push(TailParams {
                            n,
                            m,
                            sigma1: s1,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        LemmaId::InnerFixed => {
            for &n in ns {
                for &t in ts {
                    for &s2 in sigmas {
                        cells.push(TailParams {
                            n,
                            m: 1,
                            sigma1: 1.0,
                            sigma2: s2,
                            t,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        LemmaId::InnerTwoGaussian => {
            for &n in ns {
                for &t in ts {
                    for &s1 in sigmas {
                        for &s2 in sigmas {
                            cells.push(TailParams {
                                n,
                                m: 1,
                                sigma1: s1,
                                sigma2: s2,
                                t,
                                ..base.clone()
                            });
                        }
                    }
                }
            }
        }
    }
    cells
}

const CSV_HEADER: &str = "lemma,n,m,sigma1,sigma2,t,trials,freq,bound,slack,passed";

/// Render sweep results as CSV (stable column set across all lemmas).
pub fn results_to_csv(results: &[TailTestResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in results {
        let p = &r.params;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.lemma, p.n, p.m, p.sigma1, p.sigma2, p.t, p.trials, r.freq, r.bound, r.slack,
            r.passed
        ));
    }
    out
}

/// Write [`results_to_csv`] to a file.
pub fn write_results_csv(results: &[TailTestResult], path: &std::path::Path) -> Result<()> {
    std::fs::write(path, results_to_csv(results))?;
    Ok(())
}
