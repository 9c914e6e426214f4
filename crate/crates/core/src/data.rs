//! Datasets confined to a subspace, PCA, and CSV interchange.
//!
//! Generators produce the three standard on-subspace datasets used throughout
//! the experiments (a 7-point labeled line, a 5×5 checkerboard grid, and a
//! hemisphere-labeled sphere shell), each expressed in the coordinates of a
//! caller-supplied [`Subspace`]. PCA is computed from the Gram matrix
//! `XᵀX` via the crate's Jacobi eigensolver; the default is *uncentered*
//! (matching how raw image data is usually fed to subspace analyses), with
//! mean-centering available behind a flag.
//!
//! CSV schema for labeled data: a header row `x0,…,x{d−1},label`, one sample
//! per row, labels exactly ±1. Readers reject malformed files with 1-based
//! line numbers.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{dim_err, Error, Result};
use crate::geometry::{Part, Subspace};
use crate::linalg;
use crate::network::check_label;
use crate::rng::SeededRng;
use crate::tol;

/// Labeled samples, rows of `points` paired with ±1 `labels`; optionally
/// carries the subspace the points are known to lie on.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    points: Array2<f64>,
    labels: Array1<f64>,
    subspace: Option<Subspace>,
}

impl LabeledDataset {
    /// Wrap points and labels, validating labels and nonemptiness.
    pub fn new(points: Array2<f64>, labels: Array1<f64>) -> Result<LabeledDataset> {
        if points.nrows() == 0 {
            return Err(Error::Degenerate("dataset has no samples".into()));
        }
        if points.nrows() != labels.len() {
            return Err(dim_err("LabeledDataset::new", points.nrows(), labels.len()));
        }
        for y in labels.iter() {
            check_label(*y)?;
        }
        Ok(LabeledDataset {
            points,
            labels,
            subspace: None,
        })
    }

    /// Attach a subspace, verifying every point sits on it
    /// (`‖Π_{P⊥} xᵢ‖ ≤ tol::ON_SUBSPACE · max(1, ‖xᵢ‖)`).
    pub fn with_subspace(
        points: Array2<f64>,
        labels: Array1<f64>,
        subspace: Subspace,
    ) -> Result<LabeledDataset> {
        let mut ds = LabeledDataset::new(points, labels)?;
        if ds.d() != subspace.d() {
            return Err(dim_err("LabeledDataset::with_subspace", subspace.d(), ds.d()));
        }
        let off = subspace.project_rows(ds.points.view(), Part::Perp)?;
        for (index, (row, x)) in off.outer_iter().zip(ds.points.outer_iter()).enumerate() {
            let residual = linalg::norm(&row);
            if residual > tol::ON_SUBSPACE * linalg::norm(&x).max(1.0) {
                return Err(Error::OffSubspace { index, residual });
            }
        }
        ds.subspace = Some(subspace);
        Ok(ds)
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn labels(&self) -> ArrayView1<'_, f64> {
        self.labels.view()
    }

    pub fn subspace(&self) -> Option<&Subspace> {
        self.subspace.as_ref()
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    /// Ambient dimension.
    pub fn d(&self) -> usize {
        self.points.ncols()
    }

    /// Write the dataset CSV (`x0,…,x{d−1},label`); floats in shortest
    /// round-trip decimal form, labels as bare integers.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        use std::io::Write;
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        let header: Vec<String> = (0..self.d())
            .map(|j| format!("x{j}"))
            .chain(std::iter::once("label".to_string()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (row, y) in self.points.outer_iter().zip(self.labels.iter()) {
            for v in row.iter() {
                write!(out, "{v},")?;
            }
            writeln!(out, "{}", *y as i64)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Read a dataset CSV. The final column must be named `label`; every
    /// other column is a feature. Errors carry 1-based line numbers.
    pub fn read_csv(path: &Path) -> Result<LabeledDataset> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_path(path)?;
        let headers = reader
            .headers()
            .map_err(|e| csv_err_to_parse(&e))?
            .clone();
        if headers.len() < 2 {
            return Err(Error::Parse {
                line: 1,
                msg: "need at least one feature column and a label column".into(),
            });
        }
        let last = headers.get(headers.len() - 1).unwrap_or("");
        if last != "label" {
            return Err(Error::Parse {
                line: 1,
                msg: format!("final column must be named 'label', got '{last}'"),
            });
        }
        let d = headers.len() - 1;
        let mut rows: Vec<f64> = Vec::new();
        let mut labels: Vec<f64> = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_err_to_parse(&e))?;
            let line = record
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(labels.len() + 2);
            for j in 0..d {
                let field = record.get(j).unwrap_or("");
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("column x{j}: '{field}' is not a float"),
                })?;
                rows.push(v);
            }
            let field = record.get(d).unwrap_or("");
            let y: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("label '{field}' is not a number"),
            })?;
            if y != 1.0 && y != -1.0 {
                return Err(Error::Parse {
                    line,
                    msg: format!("label must be ±1, got '{field}'"),
                });
            }
            labels.push(y);
        }
        if labels.is_empty() {
            return Err(Error::Degenerate("dataset CSV has no samples".into()));
        }
        let r = labels.len();
        let points = Array2::from_shape_vec((r, d), rows).expect("row width enforced");
        LabeledDataset::new(points, Array1::from_vec(labels))
    }
}

/// Map a csv-crate error to [`Error::Parse`] with its line number.
fn csv_err_to_parse(e: &csv::Error) -> Error {
    let line = e
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(0);
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

/// The built-in dataset recipes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    /// 7 alternately labeled points spread along one in-subspace line.
    Line7,
    /// 5×5 checkerboard-labeled grid on two in-subspace directions.
    Grid25,
    /// Sphere shell in the first `sphere_dim` subspace directions with
    /// hemisphere labels.
    Sphere,
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<DatasetKind> {
        match s {
            "line7" => Ok(DatasetKind::Line7),
            "grid25" => Ok(DatasetKind::Grid25),
            "sphere" => Ok(DatasetKind::Sphere),
            other => Err(Error::InvalidParam(format!(
                "unknown dataset kind '{other}' (expected line7 | grid25 | sphere)"
            ))),
        }
    }
}

/// Tunables for the dataset generators; `Default` matches the standard
/// recipes (extent √2 so that the 2-D diagonal line runs (−1,−1) → (1,1),
/// unit radius, 28-dimensional sphere shell, 200 samples).
#[derive(Debug, Clone)]
pub struct GridParams {
    /// Half-width of the line/grid in subspace coordinates.
    pub extent: f64,
    /// Intrinsic sphere dimension (uses the first `sphere_dim` basis columns).
    pub sphere_dim: usize,
    /// Sphere radius.
    pub radius: f64,
    /// Sphere sample count.
    pub count: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            extent: std::f64::consts::SQRT_2,
            sphere_dim: 28,
            radius: 1.0,
            count: 200,
        }
    }
}

/// Dispatch a recipe by kind. Only the sphere consumes randomness.
pub fn generate(
    kind: DatasetKind,
    subspace: &Subspace,
    params: &GridParams,
    rng: &mut SeededRng,
) -> Result<LabeledDataset> {
    match kind {
        DatasetKind::Line7 => line7(subspace, params.extent),
        DatasetKind::Grid25 => grid25(subspace, params.extent),
        DatasetKind::Sphere => sphere_shell(
            subspace,
            params.sphere_dim,
            params.radius,
            params.count,
            rng,
        ),
    }
}

/// Seven points equally spaced on the in-subspace line `t ↦ t·b₁`,
/// `t ∈ [−extent, extent]`, labels alternating `+1, −1, …, +1`. The middle
/// point is the origin. With `P = span{(1,1)/√2} ⊂ ℝ²` and the default
/// extent √2 this is the diagonal segment from (−1,−1) to (1,1).
pub fn line7(subspace: &Subspace, extent: f64) -> Result<LabeledDataset> {
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(Error::InvalidParam(format!("extent must be positive, got {extent}")));
    }
    let d = subspace.d();
    let b1 = subspace.basis_p().column(0).to_owned();
    let mut points = Array2::zeros((7, d));
    let mut labels = Array1::zeros(7);
    for j in 0..7 {
        let t = extent * (j as f64 / 3.0 - 1.0);
        points.row_mut(j).assign(&b1.mapv(|b| t * b));
        labels[j] = if j % 2 == 0 { 1.0 } else { -1.0 };
    }
    LabeledDataset::with_subspace(points, labels, subspace.clone())
}

/// 5×5 grid on the first two in-subspace directions, coordinates
/// `linspace(−extent, extent, 5)²`, checkerboard labels (`+1` when the two
/// grid indices have even sum). Requires `dim P ≥ 2`.
pub fn grid25(subspace: &Subspace, extent: f64) -> Result<LabeledDataset> {
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(Error::InvalidParam(format!("extent must be positive, got {extent}")));
    }
    if subspace.dim_p() < 2 {
        return Err(Error::InvalidParam(format!(
            "grid25 needs dim P ≥ 2, got {}",
            subspace.dim_p()
        )));
    }
    let d = subspace.d();
    let b1 = subspace.basis_p().column(0).to_owned();
    let b2 = subspace.basis_p().column(1).to_owned();
    let mut points = Array2::zeros((25, d));
    let mut labels = Array1::zeros(25);
    for i in 0..5 {
        for j in 0..5 {
            let a = extent * (i as f64 / 2.0 - 1.0);
            let b = extent * (j as f64 / 2.0 - 1.0);
            let row = 5 * i + j;
            points
                .row_mut(row)
                .assign(&(&b1.mapv(|v| a * v) + &b2.mapv(|v| b * v)));
            labels[row] = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        }
    }
    LabeledDataset::with_subspace(points, labels, subspace.clone())
}

/// `count` points uniform on the radius-`radius` sphere of the first
/// `sphere_dim` in-subspace directions. Labels are hemisphere labels: a unit
/// direction `h` is drawn once (before the points), and each sample gets
/// `sign(⟨s, h⟩)` of its sphere coordinates `s` — a linearly separable
/// labeling realizable by this architecture without biases.
pub fn sphere_shell(
    subspace: &Subspace,
    sphere_dim: usize,
    radius: f64,
    count: usize,
    rng: &mut SeededRng,
) -> Result<LabeledDataset> {
    if sphere_dim == 0 || sphere_dim > subspace.dim_p() {
        return Err(Error::InvalidParam(format!(
            "sphere_dim must be in [1, dim P = {}], got {sphere_dim}",
            subspace.dim_p()
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParam(format!("radius must be positive, got {radius}")));
    }
    if count == 0 {
        return Err(Error::InvalidParam("sphere needs count ≥ 1".into()));
    }
    let d = subspace.d();
    let basis = subspace.basis_p();
    let h = loop {
        let g = rng.gaussian_vector(sphere_dim, 1.0)?;
        let n = g.dot(&g).sqrt();
        if n > tol::GRAM_SCHMIDT_PIVOT {
            break g.mapv(|v| v / n);
        }
    };
    let mut points = Array2::zeros((count, d));
    let mut labels = Array1::zeros(count);
    for row in 0..count {
        let s = loop {
            let g = rng.gaussian_vector(sphere_dim, 1.0)?;
            let n = g.dot(&g).sqrt();
            if n > tol::GRAM_SCHMIDT_PIVOT {
                break g.mapv(|v| radius * v / n);
            }
        };
        labels[row] = if s.dot(&h) >= 0.0 { 1.0 } else { -1.0 };
        let mut x = Array1::zeros(d);
        for (j, sj) in s.iter().enumerate() {
            x.scaled_add(*sj, &basis.column(j));
        }
        points.row_mut(row).assign(&x);
    }
    LabeledDataset::with_subspace(points, labels, subspace.clone())
}

/// Principal component analysis of the rows of `points`.
#[derive(Debug, Clone)]
pub struct PcaResult {
    /// `d × d` orthonormal matrix, columns sorted by descending singular value.
    pub components: Array2<f64>,
    /// Singular values of the (optionally centered) data matrix, descending.
    pub singular_values: Array1<f64>,
    /// `cumulative_variance[j]` = fraction of total squared singular value
    /// captured by the first `j + 1` components; last entry is 1.
    pub cumulative_variance: Array1<f64>,
    /// Column means that were subtracted, when centering was requested.
    pub center: Option<Array1<f64>>,
}

/// PCA via the `d × d` Gram matrix and Jacobi eigendecomposition.
///
/// `center = false` (the default convention in this crate) analyzes raw
/// second moments `XᵀX`; `center = true` subtracts column means first, which
/// requires at least two samples.
pub fn pca(points: ArrayView2<'_, f64>, center: bool) -> Result<PcaResult> {
    let (r, d) = points.dim();
    if r == 0 || d == 0 {
        return Err(Error::Degenerate("pca of an empty matrix".into()));
    }
    if center && r < 2 {
        return Err(Error::InvalidParam(
            "centered pca needs at least 2 samples".into(),
        ));
    }
    let (gram, mean) = if center {
        let mean = points.mean_axis(Axis(0)).expect("r ≥ 2");
        let centered = &points - &mean.view().insert_axis(Axis(0));
        (centered.t().dot(&centered), Some(mean))
    } else {
        (points.t().dot(&points), None)
    };
    let (eigvals, components) = linalg::jacobi_eigh(&gram)?;
    let clamped = eigvals.mapv(|v| v.max(0.0));
    let total: f64 = clamped.sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate(
            "pca input has zero total variance".into(),
        ));
    }
    let mut cum = Array1::zeros(d);
    let mut acc = 0.0;
    for j in 0..d {
        acc += clamped[j];
        cum[j] = acc / total;
    }
    Ok(PcaResult {
        components,
        singular_values: clamped.mapv(f64::sqrt),
        cumulative_variance: cum,
        center: mean,
    })
}

impl PcaResult {
    /// Smallest number of leading components whose cumulative variance
    /// reaches `fraction` (e.g. 0.90 or 0.95).
    pub fn components_needed(&self, fraction: f64) -> Result<usize> {
        if !(0.0 < fraction && fraction <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "fraction must be in (0, 1], got {fraction}"
            )));
        }
        for (j, c) in self.cumulative_variance.iter().enumerate() {
            if *c >= fraction - 1e-12 {
                return Ok(j + 1);
            }
        }
        Ok(self.cumulative_variance.len())
    }

    /// The subspace spanned by the top `k` components (`P`) against the rest
    /// (`P⊥`). Requires `1 ≤ k ≤ d − 1`.
    pub fn subspace(&self, k: usize) -> Result<Subspace> {
        let d = self.components.nrows();
        if k == 0 || k >= d {
            return Err(Error::InvalidParam(format!(
                "component split needs 1 ≤ k ≤ d−1 = {}, got {k}",
                d - 1
            )));
        }
        let basis_p = self.components.slice(ndarray::s![.., ..k]).to_owned();
        let basis_perp = self.components.slice(ndarray::s![.., k..]).to_owned();
        Subspace::from_parts(basis_p, basis_perp)
    }
}

/// Project every sample onto the span of the top `k` principal components
/// (`x ↦ V_k V_kᵀ x`, in ambient coordinates; centering, if any, is applied
/// and re-added so labels stay meaningful). The result carries the component
/// subspace.
pub fn project_dataset(data: &LabeledDataset, pca: &PcaResult, k: usize) -> Result<LabeledDataset> {
    let d = data.d();
    if pca.components.nrows() != d {
        return Err(dim_err("project_dataset", pca.components.nrows(), d));
    }
    let sub = pca.subspace(k)?;
    let vk = pca.components.slice(ndarray::s![.., ..k]);
    let projected = match &pca.center {
        Some(mean) => {
            let centered = &data.points() - &mean.view().insert_axis(Axis(0));
            let proj = centered.dot(&vk).dot(&vk.t());
            &proj + &mean.view().insert_axis(Axis(0))
        }
        None => data.points().dot(&vk).dot(&vk.t()),
    };
    // Centered projections are affine, not linear: they generally do NOT lie
    // on the span of V_k, so the subspace is only attached when uncentered.
    match &pca.center {
        Some(_) => LabeledDataset::new(projected, data.labels().to_owned()),
        None => LabeledDataset::with_subspace(projected, data.labels().to_owned(), sub),
    }
}
