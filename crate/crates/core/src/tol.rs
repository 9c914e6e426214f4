//! Fixed numerical tolerances used across the crate.
//!
//! Every invariant that is checked numerically (constructor validation, debug
//! assertions, CLI self-checks, and the acceptance suite) pulls its tolerance
//! from here so there is exactly one place to audit.

/// Orthonormality defect allowed in a stored basis: `‖BᵀB − I‖_max ≤ this`.
pub const ORTHONORMAL: f64 = 1e-10;

/// Defect allowed in the decomposition `project(x, P) + project(x, P⊥) = x`
/// and in `‖x‖² = ‖x_P‖² + ‖x_P⊥‖²`, relative to `max(1, ‖x‖)`.
pub const DECOMPOSE: f64 = 1e-10;

/// Defect allowed when re-projecting an already projected vector
/// (idempotence), relative to `max(1, ‖x‖)`.
pub const IDEMPOTENT: f64 = 1e-12;

/// How far off the subspace a training point may sit: training requires
/// `‖project(xᵢ, P⊥)‖ ≤ this` for every sample.
pub const ON_SUBSPACE: f64 = 1e-9;

/// Rotation matrices must satisfy `‖RᵀR − I‖_max ≤ this`.
pub const ROTATION_ORTHOGONAL: f64 = 1e-10;

/// Off-subspace weight components must be frozen to this tolerance during
/// unregularized on-subspace training (absolute, per weight row).
pub const FREEZE_ABSOLUTE: f64 = 1e-9;

/// Regularized off-subspace components must follow the `(1 − ηλ)ᵗ` decay law
/// to this *relative* tolerance.
pub const DECAY_RELATIVE: f64 = 1e-7;

/// Matched-seed training in rotated coordinates must agree pointwise to this
/// tolerance after several hundred steps.
pub const ROTATION_EQUIVARIANCE: f64 = 1e-6;

/// Closed-form bound identities (e.g. the corollary reductions to `1/√d`)
/// must hold to this tolerance on top of exact float evaluation.
pub const FORMULA: f64 = 1e-12;

/// Loss value beyond which training is declared divergent and aborted.
pub const DIVERGENCE_LOSS: f64 = 1e12;

/// Pivot threshold below which Gram–Schmidt declares a set of vectors
/// numerically dependent and rejects (or redraws) them.
pub const GRAM_SCHMIDT_PIVOT: f64 = 1e-12;
