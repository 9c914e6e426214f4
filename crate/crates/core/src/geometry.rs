//! Subspaces of ℝᵈ, orthogonal projections, and rotations.
//!
//! A [`Subspace`] is a pair of orthonormal bases: `basis_p` spans the data
//! subspace `P` (dimension `d − ℓ`) and `basis_perp` spans its orthogonal
//! complement `P⊥` (dimension `ℓ`). Together the columns form an orthonormal
//! basis of ℝᵈ. All projection identities the rest of the crate relies on —
//! decomposition `x = x_P + x_P⊥`, Pythagoras, idempotence — hold to the
//! tolerances in [`crate::tol`] by construction.

use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg;
use crate::rng::SeededRng;
use crate::tol;

/// Which component of the orthogonal decomposition to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    /// The data subspace `P`.
    P,
    /// The orthogonal complement `P⊥`.
    Perp,
}

/// An orthogonal decomposition `ℝᵈ = P ⊕ P⊥` with `dim P⊥ = ℓ`.
#[derive(Debug, Clone)]
pub struct Subspace {
    d: usize,
    l: usize,
    /// `d × (d − ℓ)`; columns are an orthonormal basis of `P`.
    basis_p: Array2<f64>,
    /// `d × ℓ`; columns are an orthonormal basis of `P⊥`.
    basis_perp: Array2<f64>,
}

/// On-disk form: dimensions plus row-major flattened bases.
#[derive(Serialize, Deserialize)]
struct SubspaceDto {
    d: usize,
    l: usize,
    basis_p: Vec<f64>,
    basis_perp: Vec<f64>,
}

impl Subspace {
    /// Validate `1 ≤ ℓ ≤ d − 1` (both components must be nontrivial).
    fn check_dims(d: usize, l: usize) -> Result<()> {
        if d < 2 || l == 0 || l >= d {
            return Err(Error::InvalidParam(format!(
                "subspace requires 1 ≤ l ≤ d−1, got d = {d}, l = {l}"
            )));
        }
        Ok(())
    }

    /// Axis-aligned subspace: `P = span{e₁, …, e_{d−ℓ}}`,
    /// `P⊥ = span{e_{d−ℓ+1}, …, e_d}`.
    pub fn axis(d: usize, l: usize) -> Result<Subspace> {
        Self::check_dims(d, l)?;
        let k = d - l;
        let mut basis_p = Array2::zeros((d, k));
        for j in 0..k {
            basis_p[[j, j]] = 1.0;
        }
        let mut basis_perp = Array2::zeros((d, l));
        for j in 0..l {
            basis_perp[[k + j, j]] = 1.0;
        }
        Ok(Subspace {
            d,
            l,
            basis_p,
            basis_perp,
        })
    }

    /// Uniformly random subspace: orthonormalize a `d × d` Gaussian matrix
    /// and split its columns. A numerically dependent draw (probability ~0)
    /// is redrawn from the same stream.
    pub fn random(d: usize, l: usize, rng: &mut SeededRng) -> Result<Subspace> {
        Self::check_dims(d, l)?;
        for _attempt in 0..8 {
            let g = rng.gaussian_matrix(d, d, 1.0)?;
            match linalg::orthonormalize_columns(g) {
                Ok(q) => {
                    let basis_p = q.slice(ndarray::s![.., ..d - l]).to_owned();
                    let basis_perp = q.slice(ndarray::s![.., d - l..]).to_owned();
                    return Ok(Subspace {
                        d,
                        l,
                        basis_p,
                        basis_perp,
                    });
                }
                Err(Error::Degenerate(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::Degenerate(
            "could not draw an independent Gaussian basis in 8 attempts".into(),
        ))
    }

    /// Build from explicit bases, validating shapes and joint orthonormality
    /// (`‖FᵀF − I‖_max ≤` [`tol::ORTHONORMAL`] for `F = [basis_p | basis_perp]`).
    pub fn from_parts(basis_p: Array2<f64>, basis_perp: Array2<f64>) -> Result<Subspace> {
        let d = basis_p.nrows();
        let l = basis_perp.ncols();
        Self::check_dims(d, l)?;
        if basis_perp.nrows() != d || basis_p.ncols() != d - l {
            return Err(dim_err(
                "Subspace::from_parts",
                format!("{d}×{} and {d}×{l}", d - l),
                format!(
                    "{}×{} and {}×{}",
                    basis_p.nrows(),
                    basis_p.ncols(),
                    basis_perp.nrows(),
                    basis_perp.ncols()
                ),
            ));
        }
        let full = concatenate(Axis(1), &[basis_p.view(), basis_perp.view()])
            .expect("row counts match");
        let defect = linalg::orthonormality_defect(&full.view());
        if defect > tol::ORTHONORMAL {
            return Err(Error::Degenerate(format!(
                "combined basis is not orthonormal: defect {defect:e} > {:e}",
                tol::ORTHONORMAL
            )));
        }
        Ok(Subspace {
            d,
            l,
            basis_p,
            basis_perp,
        })
    }

    /// Build from a basis of `P` alone, completing `P⊥` deterministically by
    /// Gram–Schmidt over the standard basis (candidate axes that are
    /// numerically dependent on the span so far are skipped).
    pub fn from_basis_p(basis_p: Array2<f64>) -> Result<Subspace> {
        let d = basis_p.nrows();
        let k = basis_p.ncols();
        Self::check_dims(d, d - k)?;
        let defect = linalg::orthonormality_defect(&basis_p.view());
        if defect > tol::ORTHONORMAL {
            return Err(Error::Degenerate(format!(
                "basis_p is not orthonormal: defect {defect:e}"
            )));
        }
        let mut cols: Vec<Array1<f64>> = basis_p
            .columns()
            .into_iter()
            .map(|c| c.to_owned())
            .collect();
        for axis in 0..d {
            if cols.len() == d {
                break;
            }
            let mut v = Array1::zeros(d);
            v[axis] = 1.0;
            // Two MGS passes against everything accepted so far.
            for _pass in 0..2 {
                for q in &cols {
                    let proj = q.dot(&v);
                    v.scaled_add(-proj, q);
                }
            }
            let norm = v.dot(&v).sqrt();
            if norm < tol::GRAM_SCHMIDT_PIVOT {
                continue; // this axis lies in the current span
            }
            cols.push(v.mapv(|x| x / norm));
        }
        if cols.len() != d {
            return Err(Error::Degenerate(
                "could not complete basis_p to a full orthonormal basis".into(),
            ));
        }
        let mut basis_perp = Array2::zeros((d, d - k));
        for (j, c) in cols[k..].iter().enumerate() {
            basis_perp.column_mut(j).assign(c);
        }
        Ok(Subspace {
            d,
            l: d - k,
            basis_p,
            basis_perp,
        })
    }

    /// Ambient dimension `d`.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Codimension `ℓ = dim P⊥`.
    pub fn l(&self) -> usize {
        self.l
    }

    /// `dim P = d − ℓ`.
    pub fn dim_p(&self) -> usize {
        self.d - self.l
    }

    /// Orthonormal basis of `P` (columns).
    pub fn basis_p(&self) -> ArrayView2<'_, f64> {
        self.basis_p.view()
    }

    /// Orthonormal basis of `P⊥` (columns).
    pub fn basis_perp(&self) -> ArrayView2<'_, f64> {
        self.basis_perp.view()
    }

    /// Orthogonal projection `B Bᵀ x` onto the chosen component.
    ///
    /// Internally the multiplication always goes through the *smaller* basis,
    /// using `Π_B = I − Π_{B^c}` for the wider component; the two routes agree
    /// to a few ulps and the complement form makes the decomposition identity
    /// `project(x, P) + project(x, P⊥) = x` exact.
    pub fn project(&self, x: ArrayView1<'_, f64>, part: Part) -> Result<Array1<f64>> {
        if x.len() != self.d {
            return Err(dim_err("Subspace::project", self.d, x.len()));
        }
        let p_smaller = self.dim_p() <= self.l;
        let through_small = |basis: &Array2<f64>| -> Array1<f64> {
            let coeffs = basis.t().dot(&x);
            basis.dot(&coeffs)
        };
        Ok(match (part, p_smaller) {
            (Part::P, true) => through_small(&self.basis_p),
            (Part::Perp, false) => through_small(&self.basis_perp),
            (Part::P, false) => &x - &through_small(&self.basis_perp),
            (Part::Perp, true) => &x - &through_small(&self.basis_p),
        })
    }

    /// Projection of every *row* of `a` (shape `r × d`) onto the chosen
    /// component, as one pair of GEMMs.
    pub fn project_rows(&self, a: ArrayView2<'_, f64>, part: Part) -> Result<Array2<f64>> {
        if a.ncols() != self.d {
            return Err(dim_err("Subspace::project_rows", self.d, a.ncols()));
        }
        let p_smaller = self.dim_p() <= self.l;
        let through_small = |basis: &Array2<f64>| -> Array2<f64> {
            let coeffs = a.dot(basis);
            coeffs.dot(&basis.t())
        };
        Ok(match (part, p_smaller) {
            (Part::P, true) => through_small(&self.basis_p),
            (Part::Perp, false) => through_small(&self.basis_perp),
            (Part::P, false) => &a - &through_small(&self.basis_perp),
            (Part::Perp, true) => &a - &through_small(&self.basis_p),
        })
    }

    /// A random point of `P` with the requested Euclidean norm: Gaussian
    /// coefficients in the `basis_p` frame, rescaled. `norm` must be finite
    /// and positive.
    pub fn sample_on_p(&self, norm: f64, rng: &mut SeededRng) -> Result<Array1<f64>> {
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "sample_on_p needs a positive finite norm, got {norm}"
            )));
        }
        loop {
            let coeffs = rng.gaussian_vector(self.dim_p(), 1.0)?;
            let c_norm = coeffs.dot(&coeffs).sqrt();
            if c_norm < tol::GRAM_SCHMIDT_PIVOT {
                continue; // essentially impossible; redraw
            }
            return Ok(self.basis_p.dot(&coeffs.mapv(|c| c * norm / c_norm)));
        }
    }

    /// Serialize to the interchange JSON object
    /// `{"d", "l", "basis_p", "basis_perp"}` with row-major flattened bases.
    pub fn to_json(&self) -> Result<String> {
        let dto = SubspaceDto {
            d: self.d,
            l: self.l,
            basis_p: self.basis_p.iter().copied().collect(),
            basis_perp: self.basis_perp.iter().copied().collect(),
        };
        Ok(serde_json::to_string(&dto)?)
    }

    /// Parse the interchange JSON; validates shape and orthonormality.
    pub fn from_json(s: &str) -> Result<Subspace> {
        let dto: SubspaceDto = serde_json::from_str(s)?;
        Self::check_dims(dto.d, dto.l)?;
        let k = dto.d - dto.l;
        if dto.basis_p.len() != dto.d * k || dto.basis_perp.len() != dto.d * dto.l {
            return Err(dim_err(
                "Subspace::from_json",
                format!("{} and {} floats", dto.d * k, dto.d * dto.l),
                format!("{} and {}", dto.basis_p.len(), dto.basis_perp.len()),
            ));
        }
        let basis_p = Array2::from_shape_vec((dto.d, k), dto.basis_p)
            .expect("length checked above");
        let basis_perp = Array2::from_shape_vec((dto.d, dto.l), dto.basis_perp)
            .expect("length checked above");
        Subspace::from_parts(basis_p, basis_perp)
    }

    /// Write [`Subspace::to_json`] to a file.
    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Read and validate a subspace JSON file.
    pub fn read_json(path: &std::path::Path) -> Result<Subspace> {
        Subspace::from_json(&std::fs::read_to_string(path)?)
    }
}

/// An orthogonal map of ℝᵈ (`RᵀR = I`).
#[derive(Debug, Clone)]
pub struct Rotation {
    matrix: Array2<f64>,
}

impl Rotation {
    /// Wrap an explicit matrix, validating orthogonality.
    pub fn new(matrix: Array2<f64>) -> Result<Rotation> {
        let (n, m) = matrix.dim();
        if n != m {
            return Err(dim_err("Rotation::new", "square matrix", format!("{n}×{m}")));
        }
        let defect = linalg::orthonormality_defect(&matrix.view());
        if defect > tol::ROTATION_ORTHOGONAL {
            return Err(Error::Degenerate(format!(
                "matrix is not orthogonal: defect {defect:e}"
            )));
        }
        Ok(Rotation { matrix })
    }

    /// The orthogonal map sending `src`'s frame to `dst`'s frame:
    /// `R = F_dst F_srcᵀ` where `F = [basis_p | basis_perp]`. Maps `src`'s `P`
    /// onto `dst`'s `P` and likewise for `P⊥`.
    pub fn between(src: &Subspace, dst: &Subspace) -> Result<Rotation> {
        if src.d != dst.d || src.l != dst.l {
            return Err(dim_err(
                "Rotation::between",
                format!("matching (d, l) = ({}, {})", src.d, src.l),
                format!("({}, {})", dst.d, dst.l),
            ));
        }
        let f_src = concatenate(Axis(1), &[src.basis_p.view(), src.basis_perp.view()])
            .expect("row counts match");
        let f_dst = concatenate(Axis(1), &[dst.basis_p.view(), dst.basis_perp.view()])
            .expect("row counts match");
        Ok(Rotation {
            matrix: f_dst.dot(&f_src.t()),
        })
    }

    /// Haar-ish random orthogonal map (Gram–Schmidt of a Gaussian matrix).
    pub fn random(d: usize, rng: &mut SeededRng) -> Result<Rotation> {
        if d == 0 {
            return Err(Error::InvalidParam("rotation needs d ≥ 1".into()));
        }
        for _attempt in 0..8 {
            let g = rng.gaussian_matrix(d, d, 1.0)?;
            match linalg::orthonormalize_columns(g) {
                Ok(q) => return Ok(Rotation { matrix: q }),
                Err(Error::Degenerate(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::Degenerate(
            "could not draw an orthogonal matrix in 8 attempts".into(),
        ))
    }

    /// The underlying matrix.
    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    /// `R x`.
    pub fn apply(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.matrix.nrows() {
            return Err(dim_err("Rotation::apply", self.matrix.nrows(), x.len()));
        }
        Ok(self.matrix.dot(&x))
    }

    /// Apply to every row of `a`: returns `A Rᵀ` (row `i` becomes `R aᵢ`).
    pub fn apply_to_rows(&self, a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if a.ncols() != self.matrix.nrows() {
            return Err(dim_err(
                "Rotation::apply_to_rows",
                self.matrix.nrows(),
                a.ncols(),
            ));
        }
        Ok(a.dot(&self.matrix.t()))
    }

    /// Rotate an entire decomposition: both bases map through `R`.
    pub fn apply_to_subspace(&self, s: &Subspace) -> Result<Subspace> {
        if s.d != self.matrix.nrows() {
            return Err(dim_err(
                "Rotation::apply_to_subspace",
                self.matrix.nrows(),
                s.d,
            ));
        }
        Ok(Subspace {
            d: s.d,
            l: s.l,
            basis_p: self.matrix.dot(&s.basis_p),
            basis_perp: self.matrix.dot(&s.basis_perp),
        })
    }
}
