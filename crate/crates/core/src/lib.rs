//! Numerical laboratory for off-subspace robustness of two-layer ReLU networks.
//!
//! The object of study is a width-`m` network `N(x) = Σᵢ uᵢ·σ(⟨wᵢ, x⟩)` on
//! `ℝᵈ` with frozen second layer `uᵢ ∈ {±1/√m}`, no biases, and first-layer
//! weights trained by (stochastic) gradient descent on the logistic loss. The
//! training data is confined to a linear subspace `P ⊂ ℝᵈ` of codimension `ℓ`.
//!
//! The crate provides the pieces needed to probe what happens *off* `P`:
//!
//! - [`geometry`] — subspaces, orthogonal projections, rotations, and the
//!   seeded Gaussian sampling everything else builds on;
//! - [`network`] — the two-layer model, its forward pass and gradients, and
//!   the active-neuron bookkeeping the closed-form results depend on;
//! - [`training`] — full-batch GD / mini-batch SGD with per-step traces of the
//!   loss, dataset margin, and off-subspace weight drift;
//! - [`attacks`] — gradient-norm reports with matching lower/upper bounds, the
//!   closed-form universal off-subspace perturbation, and plain PGD in three
//!   projection modes;
//! - [`concentration`] — Monte Carlo falsification harness for the Gaussian
//!   tail bounds the theory leans on, with exact-CDF cross-checks;
//! - [`data`] — on-subspace dataset generators, PCA, and CSV/JSON interchange;
//! - [`experiments`] — the composite sweeps behind the CLI and the acceptance
//!   suite (gradient scans, init/regularization sweeps, rotation checks).
//!
//! Everything that draws randomness takes an explicit 64-bit seed and is
//! reproducible bit-for-bit under a pinned dependency set; see [`rng`].

pub mod attacks;
pub mod concentration;
pub mod data;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod network;
pub mod rng;
pub mod special;
pub mod tol;
pub mod training;

pub use error::{Error, Result};
