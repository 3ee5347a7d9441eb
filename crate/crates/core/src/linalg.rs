//! Dense complex linear algebra: matrices, leveled elements, Hermitian
//! eigenvalues, Schatten norms, realignment and the flip conjugation.
//!
//! Everything here is pure and operates on immutable inputs.

use num_complex::ComplexFloat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Complex64 = num_complex::Complex<f64>;

pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not hermitian: defect {defect:.3e} exceeds {allowed:.3e}")]
    NonHermitian { defect: f64, allowed: f64 },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("elements live over different base spaces")]
    BaseSpaceMismatch,
    #[error("operation requires a matrix-model base (dimension must be a perfect square)")]
    WrongBaseModel,
    #[error("invalid Schatten exponent p = {0}; p must be >= 1")]
    InvalidP(f64),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Relative tolerance used by the hermiticity pre-check of eigenvalue routines.
pub const HERMITICITY_REL_TOL: f64 = 1e-10;

/// Default relative PSD tolerance. All cone tests reduce to this one knob.
pub const PSD_REL_TOL: f64 = 1e-9;

/// Default absolute PSD tolerance for a given matrix, relative to its trace norm
/// (floored at 1 so the zero matrix keeps a nonzero slack).
pub fn default_psd_tol(m: &ComplexMatrix) -> f64 {
    PSD_REL_TOL * m.trace_norm().max(1.0)
}

// ---------------------------------------------------------------------------
// ComplexMatrix
// ---------------------------------------------------------------------------

/// Dense complex matrix, row-major storage. Serializes with entries as
/// [re, im] pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ComplexMatrixJson", into = "ComplexMatrixJson")]
pub struct ComplexMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct ComplexMatrixJson {
    rows: usize,
    cols: usize,
    entries: Vec<[f64; 2]>,
}

impl From<ComplexMatrixJson> for ComplexMatrix {
    fn from(j: ComplexMatrixJson) -> Self {
        ComplexMatrix {
            rows: j.rows,
            cols: j.cols,
            entries: j.entries.iter().map(|&[re, im]| Complex64::new(re, im)).collect(),
        }
    }
}

impl From<ComplexMatrix> for ComplexMatrixJson {
    fn from(m: ComplexMatrix) -> Self {
        ComplexMatrixJson {
            rows: m.rows,
            cols: m.cols,
            entries: m.entries.iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![C_ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, C_ONE);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self { rows, cols, entries }
    }

    /// Real-valued convenience constructor used heavily in tests.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r > 0 { rows[0].len() } else { 0 };
        Self::from_fn(r, c, |i, j| Complex64::new(rows[i][j], 0.0))
    }

    /// Matrix unit E_{ij}.
    pub fn matrix_unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m.set(i, j, C_ONE);
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.abs()).fold(0.0, f64::max)
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matrix product shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == C_ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// Kronecker product; row index of the result is (i_self, i_other).
    pub fn kron(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.set(i * other.rows + k, j * other.cols + l, a * other.get(k, l));
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Entrywise max norm of M - M*.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut d = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                d = d.max((self.get(i, j) - self.get(j, i).conj()).abs());
            }
        }
        d
    }

    fn check_hermitian(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let allowed = HERMITICITY_REL_TOL * self.max_abs();
        let defect = self.hermitian_defect();
        if defect > allowed {
            return Err(LinalgError::NonHermitian { defect, allowed });
        }
        Ok(())
    }

    fn to_nalgebra(&self) -> nalgebra::DMatrix<Complex64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }

    /// Eigenvalues of a Hermitian matrix, ascending. The input is symmetrised
    /// to (M + M*)/2 after the hermiticity pre-check so roundoff in the upper
    /// triangle cannot leak into the solver.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        self.check_hermitian()?;
        let h = self.add(&self.adjoint()).scale(Complex64::new(0.5, 0.0));
        let mut vals: Vec<f64> = h.to_nalgebra().symmetric_eigen().eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(vals)
    }

    /// Full Hermitian eigendecomposition: (eigenvalues ascending, eigenvectors
    /// as matching columns).
    pub fn hermitian_eigen(&self) -> Result<(Vec<f64>, ComplexMatrix)> {
        self.check_hermitian()?;
        let h = self.add(&self.adjoint()).scale(Complex64::new(0.5, 0.0));
        let eig = h.to_nalgebra().symmetric_eigen();
        let n = self.rows;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let vals: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vecs = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Ok((vals, vecs))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.hermitian_eigenvalues()?[0])
    }

    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        Ok(self.min_eigenvalue()? >= -tol)
    }

    /// PSD square root via eigendecomposition; eigenvalues in [-1e-12, 0) are
    /// clamped to zero.
    pub fn psd_sqrt(&self) -> Result<ComplexMatrix> {
        let (vals, vecs) = self.hermitian_eigen()?;
        let n = self.rows;
        let mut out = ComplexMatrix::zeros(n, n);
        for k in 0..n {
            let lam = vals[k].max(0.0);
            if lam == 0.0 {
                continue;
            }
            let s = lam.sqrt();
            for i in 0..n {
                let vi = vecs.get(i, k);
                for j in 0..n {
                    let v = out.get(i, j) + vi * vecs.get(j, k).conj() * s;
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    /// Thin SVD M = U diag(sigma) V†, singular values descending.
    pub fn svd(&self) -> (ComplexMatrix, Vec<f64>, ComplexMatrix) {
        let svd = self.to_nalgebra().svd(true, true);
        let u = svd.u.expect("svd with vectors requested");
        let vt = svd.v_t.expect("svd with vectors requested");
        let k = svd.singular_values.len();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
        let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        let u_m = ComplexMatrix::from_fn(self.rows, k, |i, j| u[(i, order[j])]);
        let vt_m = ComplexMatrix::from_fn(k, self.cols, |i, j| vt[(order[i], j)]);
        (u_m, sigma, vt_m)
    }

    /// Singular values, descending, via the eigenvalues of M*M. Eigenvalues
    /// below 1e-14 of the largest are clamped to zero; without the relative
    /// floor, gram-level roundoff of order eps turns into sqrt(eps) noise in
    /// the small singular values of rank-deficient matrices.
    pub fn singular_values(&self) -> Vec<f64> {
        let gram = self.adjoint().mul(self);
        let raw = gram
            .hermitian_eigenvalues()
            .expect("M*M is hermitian by construction");
        let floor = 1e-14 * raw.iter().copied().fold(0.0, f64::max);
        let mut vals: Vec<f64> = raw
            .into_iter()
            .map(|l| if l <= floor { 0.0 } else { l.sqrt() })
            .collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        vals
    }

    /// Schatten p-norm; the operator norm for p = infinity.
    pub fn schatten_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(LinalgError::InvalidP(p));
        }
        if !self.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let sv = self.singular_values();
        if p.is_infinite() {
            return Ok(sv.first().copied().unwrap_or(0.0));
        }
        Ok(sv.iter().map(|s| s.powf(p)).sum::<f64>().powf(1.0 / p))
    }

    pub fn operator_norm(&self) -> f64 {
        self.schatten_norm(f64::INFINITY).expect("infinity is a valid exponent")
    }

    pub fn trace_norm(&self) -> f64 {
        self.schatten_norm(1.0).expect("1 is a valid exponent")
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Applies M to a vector.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// Sesquilinear form u* M v (antilinear in u).
    pub fn form(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        let mv = self.apply(v);
        u.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum()
    }
}

// ---------------------------------------------------------------------------
// Involution models
// ---------------------------------------------------------------------------

/// Involution on base-space coordinate vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Involution {
    /// Coordinatewise complex conjugation (lattice models).
    CoordinateConjugation,
    /// Conjugate transpose of the m x m reshape (matrix models, dim = m^2).
    MatrixAdjoint,
}

impl Involution {
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        match self {
            Involution::CoordinateConjugation => v.iter().map(|z| z.conj()).collect(),
            Involution::MatrixAdjoint => {
                let m = isqrt_exact(v.len()).expect("matrix involution requires dim = m^2");
                let mut out = vec![C_ZERO; v.len()];
                for k in 0..m {
                    for l in 0..m {
                        out[k * m + l] = v[l * m + k].conj();
                    }
                }
                out
            }
        }
    }
}

/// Exact integer square root, if the input is a perfect square.
pub fn isqrt_exact(d: usize) -> Option<usize> {
    let r = (d as f64).sqrt().round() as usize;
    if r * r == d {
        Some(r)
    } else {
        None
    }
}

/// Reshape a length-m^2 coordinate vector into its m x m matrix (row-major).
pub fn reshape_vec(v: &[Complex64]) -> Result<ComplexMatrix> {
    let m = isqrt_exact(v.len()).ok_or(LinalgError::WrongBaseModel)?;
    Ok(ComplexMatrix { rows: m, cols: m, entries: v.to_vec() })
}

/// Flatten an m x m matrix back into a coordinate vector.
pub fn flatten_mat(m: &ComplexMatrix) -> Vec<Complex64> {
    m.entries.clone()
}

// ---------------------------------------------------------------------------
// LeveledElement
// ---------------------------------------------------------------------------

/// An element of the level-n matrix space over a d-dimensional base: an
/// n x n array of coordinate vectors x_{ij} in C^d, stored row-major.
/// Serializes as {"level", "base_dim", "coeffs": [[[re,im], ...], ...]}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "LeveledElementJson",
    into = "LeveledElementJson"
)]
pub struct LeveledElement {
    pub level: usize,
    pub base_dim: usize,
    pub coeffs: Vec<Vec<Complex64>>,
}

#[derive(Serialize, Deserialize)]
struct LeveledElementJson {
    level: usize,
    base_dim: usize,
    coeffs: Vec<Vec<[f64; 2]>>,
}

impl TryFrom<LeveledElementJson> for LeveledElement {
    type Error = LinalgError;
    fn try_from(j: LeveledElementJson) -> Result<Self> {
        LeveledElement::from_coeffs(
            j.level,
            j.base_dim,
            j.coeffs
                .iter()
                .map(|v| v.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
                .collect(),
        )
    }
}

impl From<LeveledElement> for LeveledElementJson {
    fn from(x: LeveledElement) -> Self {
        LeveledElementJson {
            level: x.level,
            base_dim: x.base_dim,
            coeffs: x
                .coeffs
                .iter()
                .map(|v| v.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        }
    }
}

impl LeveledElement {
    pub fn zero(level: usize, base_dim: usize) -> Self {
        Self { level, base_dim, coeffs: vec![vec![C_ZERO; base_dim]; level * level] }
    }

    pub fn from_coeffs(level: usize, base_dim: usize, coeffs: Vec<Vec<Complex64>>) -> Result<Self> {
        if coeffs.len() != level * level || coeffs.iter().any(|v| v.len() != base_dim) {
            return Err(LinalgError::DimensionMismatch(format!(
                "expected {} coordinate vectors of length {}",
                level * level,
                base_dim
            )));
        }
        if coeffs
            .iter()
            .any(|v| v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()))
        {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self { level, base_dim, coeffs })
    }

    /// Elementary tensor a (x) v.
    pub fn elementary(a: &ComplexMatrix, v: &[Complex64]) -> Self {
        assert!(a.is_square());
        let n = a.rows;
        let coeffs = (0..n * n)
            .map(|idx| {
                let c = a.entries[idx];
                v.iter().map(|z| c * z).collect()
            })
            .collect();
        Self { level: n, base_dim: v.len(), coeffs }
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> &[Complex64] {
        &self.coeffs[i * self.level + j]
    }

    pub fn set_entry(&mut self, i: usize, j: usize, v: Vec<Complex64>) {
        assert_eq!(v.len(), self.base_dim);
        let n = self.level;
        self.coeffs[i * n + j] = v;
    }

    /// The n x n scalar matrix of k-th coordinates ([x_{ij}]_k)_{ij}.
    pub fn coordinate_matrix(&self, k: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.level, self.level, |i, j| self.entry(i, j)[k])
    }

    pub fn from_coordinate_matrices(mats: &[ComplexMatrix]) -> Self {
        let d = mats.len();
        assert!(d > 0);
        let n = mats[0].rows;
        let mut out = Self::zero(n, d);
        for i in 0..n {
            for j in 0..n {
                let v: Vec<Complex64> = (0..d).map(|k| mats[k].get(i, j)).collect();
                out.set_entry(i, j, v);
            }
        }
        out
    }

    /// Adjoint: entry (i,j) becomes the involution of entry (j,i).
    pub fn adjoint(&self, inv: Involution) -> Self {
        let n = self.level;
        let mut out = Self::zero(n, self.base_dim);
        for i in 0..n {
            for j in 0..n {
                out.set_entry(i, j, inv.apply(self.entry(j, i)));
            }
        }
        out
    }

    pub fn is_hermitian(&self, inv: Involution, tol: f64) -> bool {
        self.sub(&self.adjoint(inv)).max_abs() <= tol
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.level, self.base_dim), (other.level, other.base_dim));
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Self { level: self.level, base_dim: self.base_dim, coeffs }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .map(|v| v.iter().map(|z| z * s).collect())
            .collect();
        Self { level: self.level, base_dim: self.base_dim, coeffs }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .iter()
            .flat_map(|v| v.iter())
            .map(|z| z.abs())
            .fold(0.0, f64::max)
    }

    /// Compression a . x . b* with a, b of shape m x n and x of level n:
    /// result_{kl} = sum_{ij} a_{ki} x_{ij} conj(b_{lj}).
    pub fn compress(a: &ComplexMatrix, x: &Self, b: &ComplexMatrix) -> Result<Self> {
        let n = x.level;
        if a.cols != n || b.cols != n || a.rows != b.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "compress needs a, b of shape m x {}, got {}x{} and {}x{}",
                n, a.rows, a.cols, b.rows, b.cols
            )));
        }
        let b_adj = b.adjoint();
        let mats: Vec<ComplexMatrix> = (0..x.base_dim)
            .map(|k| a.mul(&x.coordinate_matrix(k)).mul(&b_adj))
            .collect();
        Ok(Self::from_coordinate_matrices(&mats))
    }

    /// Block-diagonal direct sum.
    pub fn direct_sum(x: &Self, y: &Self) -> Result<Self> {
        if x.base_dim != y.base_dim {
            return Err(LinalgError::BaseSpaceMismatch);
        }
        let (m, n) = (x.level, y.level);
        let mut out = Self::zero(m + n, x.base_dim);
        for i in 0..m {
            for j in 0..m {
                out.set_entry(i, j, x.entry(i, j).to_vec());
            }
        }
        for i in 0..n {
            for j in 0..n {
                out.set_entry(m + i, m + j, y.entry(i, j).to_vec());
            }
        }
        Ok(out)
    }

    /// Assemble the level-2n block [[x1, x], [x*, x2]].
    pub fn block2(x1: &Self, x: &Self, x2: &Self, inv: Involution) -> Self {
        let n = x.level;
        assert_eq!(x1.level, n);
        assert_eq!(x2.level, n);
        let xs = x.adjoint(inv);
        let mut out = Self::zero(2 * n, x.base_dim);
        for i in 0..n {
            for j in 0..n {
                out.set_entry(i, j, x1.entry(i, j).to_vec());
                out.set_entry(i, n + j, x.entry(i, j).to_vec());
                out.set_entry(n + i, j, xs.entry(i, j).to_vec());
                out.set_entry(n + i, n + j, x2.entry(i, j).to_vec());
            }
        }
        out
    }

    /// Hermitian dilation [[0, x], [x*, 0]].
    pub fn hermitian_dilation(&self, inv: Involution) -> Self {
        let z = Self::zero(self.level, self.base_dim);
        Self::block2(&z, self, &z, inv)
    }

    /// Split a level-2n element into (upper-left, upper-right, lower-right).
    pub fn split_block2(&self) -> Option<(Self, Self, Self)> {
        if self.level % 2 != 0 {
            return None;
        }
        let n = self.level / 2;
        let mut x1 = Self::zero(n, self.base_dim);
        let mut x = Self::zero(n, self.base_dim);
        let mut x2 = Self::zero(n, self.base_dim);
        for i in 0..n {
            for j in 0..n {
                x1.set_entry(i, j, self.entry(i, j).to_vec());
                x.set_entry(i, j, self.entry(i, n + j).to_vec());
                x2.set_entry(i, j, self.entry(n + i, n + j).to_vec());
            }
        }
        Some((x1, x, x2))
    }

    /// Realignment over a matrix-model base (d = m^2): the nm x nm scalar
    /// matrix with entry ((i,k),(j,l)) = [x_{ij}]_{kl}.
    pub fn realign(&self) -> Result<ComplexMatrix> {
        let m = isqrt_exact(self.base_dim).ok_or(LinalgError::WrongBaseModel)?;
        let n = self.level;
        let mut out = ComplexMatrix::zeros(n * m, n * m);
        for i in 0..n {
            for j in 0..n {
                let v = self.entry(i, j);
                for k in 0..m {
                    for l in 0..m {
                        out.set(i * m + k, j * m + l, v[k * m + l]);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`realign`]: rebuild a level-n element over an m^2 base.
    pub fn unrealign(mat: &ComplexMatrix, n: usize, m: usize) -> Result<Self> {
        if mat.rows != n * m || mat.cols != n * m {
            return Err(LinalgError::DimensionMismatch(format!(
                "unrealign expects a {}x{} matrix, got {}x{}",
                n * m,
                n * m,
                mat.rows,
                mat.cols
            )));
        }
        let mut out = Self::zero(n, m * m);
        for i in 0..n {
            for j in 0..n {
                let mut v = vec![C_ZERO; m * m];
                for k in 0..m {
                    for l in 0..m {
                        v[k * m + l] = mat.get(i * m + k, j * m + l);
                    }
                }
                out.set_entry(i, j, v);
            }
        }
        Ok(out)
    }

    /// U* . realign(x) . U with U the flip |j l> -> |l j>. Spectrum-preserving,
    /// so the result is PSD iff the realignment is.
    pub fn flip_conjugate(&self) -> Result<ComplexMatrix> {
        let m = isqrt_exact(self.base_dim).ok_or(LinalgError::WrongBaseModel)?;
        Ok(flip_conjugate_realigned(&self.realign()?, self.level, m))
    }
}

/// Conjugate an already-realigned nm x nm matrix by the flip unitary:
/// result[(k,i),(l,j)] = input[(i,k),(j,l)] with i,j < n and k,l < m.
pub fn flip_conjugate_realigned(mat: &ComplexMatrix, n: usize, m: usize) -> ComplexMatrix {
    assert_eq!(mat.rows, n * m);
    assert_eq!(mat.cols, n * m);
    let mut out = ComplexMatrix::zeros(n * m, n * m);
    for i in 0..n {
        for k in 0..m {
            for j in 0..n {
                for l in 0..m {
                    out.set(k * n + i, l * n + j, mat.get(i * m + k, j * m + l));
                }
            }
        }
    }
    out
}

/// The swap (flip) element sum_{i,j<n} E_{ij} (x) E_{ji} over an n^2 base.
pub fn flip_element(n: usize) -> LeveledElement {
    let mut x = LeveledElement::zero(n, n * n);
    for i in 0..n {
        for j in 0..n {
            let mut v = vec![C_ZERO; n * n];
            v[j * n + i] = C_ONE; // E_{ji} flattened row-major
            x.set_entry(i, j, v);
        }
    }
    x
}
