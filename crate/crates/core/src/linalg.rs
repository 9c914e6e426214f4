//! Small dense linear-algebra kernels.
//!
//! Everything here is hand-rolled on purpose: the sizes in play are desk-scale
//! (d ≤ ~4096 for tall-skinny factorizations, d ≤ ~784 for full symmetric
//! eigenproblems), which keeps the crate free of BLAS/LAPACK system linkage
//! while staying well inside the crate-wide tolerances in [`crate::tol`].

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{dim_err, Error, Result};
use crate::tol;

/// Orthonormalize the columns of `a` in place with modified Gram–Schmidt.
///
/// A second orthogonalization pass is run per column ("twice is enough"),
/// which brings `‖QᵀQ − I‖_max` down to a few ulps even for ill-conditioned
/// inputs. Columns whose residual norm falls below
/// [`tol::GRAM_SCHMIDT_PIVOT`] are numerically dependent on their
/// predecessors; the function rejects the input rather than fabricating a
/// direction.
pub fn orthonormalize_columns(mut a: Array2<f64>) -> Result<Array2<f64>> {
    let (n, k) = a.dim();
    if k > n {
        return Err(dim_err("orthonormalize_columns", format!("≤ {n} columns"), k));
    }
    for j in 0..k {
        for _pass in 0..2 {
            for i in 0..j {
                let proj = a.column(i).dot(&a.column(j));
                let qi = a.column(i).to_owned();
                a.column_mut(j).scaled_add(-proj, &qi);
            }
        }
        let norm = a.column(j).dot(&a.column(j)).sqrt();
        if norm < tol::GRAM_SCHMIDT_PIVOT {
            return Err(Error::Degenerate(format!(
                "column {j} is numerically dependent (residual norm {norm:e})"
            )));
        }
        a.column_mut(j).mapv_inplace(|x| x / norm);
    }
    Ok(a)
}

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
///
/// Returns `(eigenvalues, eigenvectors)` sorted by descending eigenvalue;
/// eigenvectors are the *columns* of the returned matrix. Symmetry is taken
/// on trust (the strictly lower triangle is read together with the upper).
/// Convergence is quadratic once off-diagonal mass is small; 30 sweeps is far
/// beyond what any desk-scale input needs and acts as a defect guard.
pub fn jacobi_eigh(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let (n, m) = a.dim();
    if n != m {
        return Err(dim_err("jacobi_eigh", "square matrix", format!("{n}×{m}")));
    }
    let mut a = a.clone();
    let mut v = Array2::eye(n);
    if n <= 1 {
        return Ok((a.diag().to_owned(), v));
    }
    let scale = a.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1.0);
    let stop = 1e-15 * scale;
    for _sweep in 0..30 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[[p, q]].abs());
            }
        }
        if off <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq.abs() <= stop * 1e-2 {
                    continue;
                }
                let tau = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotate rows/columns p and q of A.
                for i in 0..n {
                    let aip = a[[i, p]];
                    let aiq = a[[i, q]];
                    a[[i, p]] = c * aip - s * aiq;
                    a[[i, q]] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[[p, i]];
                    let aqi = a[[q, i]];
                    a[[p, i]] = c * api - s * aqi;
                    a[[q, i]] = s * api + c * aqi;
                }
                // Accumulate the eigenvector rotation.
                for i in 0..n {
                    let vip = v[[i, p]];
                    let viq = v[[i, q]];
                    v[[i, p]] = c * vip - s * viq;
                    v[[i, q]] = s * vip + c * viq;
                }
            }
        }
    }
    let mut eig: Vec<(f64, usize)> = a.diag().iter().copied().zip(0..n).collect();
    eig.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));
    let values = Array1::from_iter(eig.iter().map(|(val, _)| *val));
    let mut vectors = Array2::zeros((n, n));
    for (dst, (_, src)) in eig.iter().enumerate() {
        vectors.column_mut(dst).assign(&v.column(*src));
    }
    Ok((values, vectors))
}

/// Determinant via partial-pivot LU. Intended for invariant checks on
/// orthogonal matrices (|det| = 1), not for production-scale n.
pub fn lu_det(a: ArrayView2<'_, f64>) -> Result<f64> {
    let (n, m) = a.dim();
    if n != m {
        return Err(dim_err("lu_det", "square matrix", format!("{n}×{m}")));
    }
    let mut lu = a.to_owned();
    let mut det = 1.0f64;
    for k in 0..n {
        let mut piv = k;
        for i in (k + 1)..n {
            if lu[[i, k]].abs() > lu[[piv, k]].abs() {
                piv = i;
            }
        }
        if lu[[piv, k]] == 0.0 {
            return Ok(0.0);
        }
        if piv != k {
            for j in 0..n {
                let tmp = lu[[k, j]];
                lu[[k, j]] = lu[[piv, j]];
                lu[[piv, j]] = tmp;
            }
            det = -det;
        }
        det *= lu[[k, k]];
        for i in (k + 1)..n {
            let f = lu[[i, k]] / lu[[k, k]];
            for j in (k + 1)..n {
                lu[[i, j]] -= f * lu[[k, j]];
            }
        }
    }
    Ok(det)
}

/// `‖AᵀA − I‖_max` — orthonormality defect of a column set.
pub fn orthonormality_defect(a: &ArrayView2<'_, f64>) -> f64 {
    let gram = a.t().dot(a);
    let k = gram.nrows();
    let mut defect = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((gram[[i, j]] - target).abs());
        }
    }
    defect
}

/// Euclidean norm of a vector view.
pub fn norm(v: &ndarray::ArrayView1<'_, f64>) -> f64 {
    v.dot(v).sqrt()
}

/// Largest absolute row norm of `a` (rows as vectors).
pub fn max_row_norm(a: &ArrayView2<'_, f64>) -> f64 {
    a.axis_iter(Axis(0))
        .map(|r| norm(&r))
        .fold(0.0f64, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use ndarray::array;

    #[test]
    fn mgs_produces_orthonormal_columns() {
        let mut rng = SeededRng::new(3);
        let a = rng.gaussian_matrix(40, 12, 1.0).unwrap();
        let q = orthonormalize_columns(a).unwrap();
        assert!(orthonormality_defect(&q.view()) < 1e-13);
    }

    #[test]
    fn mgs_rejects_dependent_columns() {
        let mut a = Array2::zeros((5, 3));
        a.column_mut(0).assign(&array![1.0, 2.0, 0.0, 0.0, 1.0]);
        a.column_mut(1).assign(&array![2.0, 4.0, 0.0, 0.0, 2.0]); // 2 × col0
        a.column_mut(2).assign(&array![0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            orthonormalize_columns(a),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn mgs_rejects_more_columns_than_rows() {
        let a = Array2::<f64>::zeros((3, 5));
        assert!(orthonormalize_columns(a).is_err());
    }

    #[test]
    fn jacobi_matches_hand_computed_2x2() {
        // Eigenvalues of [[2,1],[1,2]] are 3 and 1, eigenvectors (1,1)/√2, (1,-1)/√2.
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = jacobi_eigh(&a).unwrap();
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        let v0 = vecs.column(0);
        assert!((v0[0].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((v0[0] - v0[1]).abs() < 1e-12);
    }

    #[test]
    fn jacobi_reconstructs_random_symmetric_matrix() {
        let mut rng = SeededRng::new(17);
        let g = rng.gaussian_matrix(20, 20, 1.0).unwrap();
        let a = &g + &g.t(); // symmetric
        let (vals, vecs) = jacobi_eigh(&a).unwrap();
        // Descending order.
        for i in 1..vals.len() {
            assert!(vals[i - 1] >= vals[i] - 1e-12);
        }
        // A·v_i = λ_i·v_i and orthonormal V.
        assert!(orthonormality_defect(&vecs.view()) < 1e-12);
        for i in 0..vals.len() {
            let av = a.dot(&vecs.column(i));
            let lv = vecs.column(i).mapv(|x| x * vals[i]);
            let err = (&av - &lv).iter().map(|x| x.abs()).fold(0.0f64, f64::max);
            assert!(err < 1e-10, "eigenpair {i} residual {err}");
        }
    }

    #[test]
    fn lu_det_matches_cofactor_expansion() {
        let a = array![[4.0, 3.0], [6.0, 3.0]];
        assert!((lu_det(a.view()).unwrap() - -6.0).abs() < 1e-12);
        let b = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 10.0]];
        assert!((lu_det(b.view()).unwrap() - -3.0).abs() < 1e-12);
        // Row swap of the identity has determinant -1.
        let p = array![[0.0, 1.0], [1.0, 0.0]];
        assert!((lu_det(p.view()).unwrap() + 1.0).abs() < 1e-15);
    }
}
