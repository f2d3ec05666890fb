//! Dense complex linear algebra shared by every other module.
//!
//! [`ComplexMatrix`] is a thin wrapper over `nalgebra::DMatrix<Complex64>`; it
//! derefs to the inner matrix so the full nalgebra API stays available, while the
//! free functions here fix the conventions the rest of the crate relies on: one
//! rank cutoff, zero-dimensional matrices as first-class values, and explicit
//! rejection of non-finite input.
//!
//! Singular value decompositions go through `faer`; nalgebra's complex SVD
//! returns inaccurate factors on some rank-deficient inputs.

use std::fmt;
use std::ops::{Deref, DerefMut};

use faer::Mat;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{GiaError, Result};

/// Relative singular-value cutoff shared by rank decisions and pseudo-inverses.
///
/// A singular value counts toward the rank when it exceeds
/// `DEFAULT_RANK_TOL * sigma_max * max(rows, cols)`.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        ComplexMatrix(DMatrix::identity(n, n))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        ComplexMatrix(DMatrix::from_fn(rows, cols, f))
    }

    /// Builds a matrix from entries listed row by row.
    pub fn from_row_slice(rows: usize, cols: usize, entries: &[Complex64]) -> Self {
        ComplexMatrix(DMatrix::from_row_slice(rows, cols, entries))
    }

    /// Real-valued convenience constructor, row-major.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        ComplexMatrix::from_fn(r, c, |i, j| Complex64::new(rows[i][j], 0.0))
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn inner(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn is_empty(&self) -> bool {
        self.rows() == 0 || self.cols() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn matmul(&self, rhs: &ComplexMatrix) -> Self {
        ComplexMatrix(&self.0 * &rhs.0)
    }

    /// Sum of squared entry magnitudes, without the finiteness check.
    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Copies out the `nrows x ncols` block whose top-left corner is `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nrows: usize, ncols: usize) -> Self {
        ComplexMatrix(self.0.view((r0, c0), (nrows, ncols)).into_owned())
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, src: &ComplexMatrix) {
        if src.is_empty() {
            return;
        }
        self.0
            .view_mut((r0, c0), (src.rows(), src.cols()))
            .copy_from(&src.0);
    }

    /// Stacks matrices top to bottom. All parts must share a column count;
    /// `cols` fixes the width when `parts` is empty.
    pub fn vstack(parts: &[ComplexMatrix], cols: usize) -> Self {
        let rows = parts.iter().map(|p| p.rows()).sum();
        let mut out = ComplexMatrix::zeros(rows, cols);
        let mut r0 = 0;
        for p in parts {
            debug_assert_eq!(p.cols(), cols);
            out.set_block(r0, 0, p);
            r0 += p.rows();
        }
        out
    }

    /// Concatenates matrices left to right; `rows` fixes the height when `parts` is empty.
    pub fn hstack(parts: &[ComplexMatrix], rows: usize) -> Self {
        let cols = parts.iter().map(|p| p.cols()).sum();
        let mut out = ComplexMatrix::zeros(rows, cols);
        let mut c0 = 0;
        for p in parts {
            debug_assert_eq!(p.rows(), rows);
            out.set_block(0, c0, p);
            c0 += p.cols();
        }
        out
    }
}

impl Deref for ComplexMatrix {
    type Target = DMatrix<Complex64>;

    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

impl DerefMut for ComplexMatrix {
    fn deref_mut(&mut self) -> &mut Self::Target {
        &mut self.0
    }
}

impl From<DMatrix<Complex64>> for ComplexMatrix {
    fn from(m: DMatrix<Complex64>) -> Self {
        ComplexMatrix(m)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix {}x{} {:?}", self.rows(), self.cols(), self.0.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankResult {
    pub rank: usize,
    /// Nonincreasing.
    pub singular_values: Vec<f64>,
    /// Absolute cutoff actually applied.
    pub tolerance_used: f64,
}

fn ensure_finite(m: &ComplexMatrix) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(GiaError::InvalidInput("matrix has non-finite entries".into()))
    }
}

fn to_faer(m: &ComplexMatrix) -> Mat<Complex64> {
    Mat::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

/// Singular values in nonincreasing order.
fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>> {
    let mut s = to_faer(m).singular_values().map_err(|_| GiaError::NoConvergence)?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

fn cutoff(sigma_max: f64, rows: usize, cols: usize, rel_tol: f64) -> f64 {
    rel_tol * sigma_max * rows.max(cols) as f64
}

/// Numerical rank from the singular values: the number of them above
/// `rel_tol * sigma_max * max(rows, cols)` (default [`DEFAULT_RANK_TOL`]).
pub fn numerical_rank(m: &ComplexMatrix, rel_tol: Option<f64>) -> Result<RankResult> {
    ensure_finite(m)?;
    let rel_tol = rel_tol.unwrap_or(DEFAULT_RANK_TOL);
    if rel_tol < 0.0 || !rel_tol.is_finite() {
        return Err(GiaError::InvalidInput(format!("rank tolerance {rel_tol} is not a nonnegative real")));
    }
    if m.is_empty() {
        return Ok(RankResult { rank: 0, singular_values: Vec::new(), tolerance_used: 0.0 });
    }
    let singular_values = singular_values(m)?;
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let tol = cutoff(sigma_max, m.rows(), m.cols(), rel_tol);
    let rank = singular_values.iter().filter(|&&s| s > tol).count();
    Ok(RankResult { rank, singular_values, tolerance_used: tol })
}

/// Moore-Penrose pseudo-inverse; singular values at or below the rank cutoff
/// are treated as zero.
pub fn pseudo_inverse(m: &ComplexMatrix, rel_tol: Option<f64>) -> Result<ComplexMatrix> {
    ensure_finite(m)?;
    let rel_tol = rel_tol.unwrap_or(DEFAULT_RANK_TOL);
    if m.is_empty() {
        return Ok(ComplexMatrix::zeros(m.cols(), m.rows()));
    }
    let svd = to_faer(m).thin_svd().map_err(|_| GiaError::NoConvergence)?;
    let (u, v) = (svd.U(), svd.V());
    let sv: Vec<f64> = (0..u.ncols()).map(|i| svd.S()[i].re).collect();
    let sigma_max = sv.iter().copied().fold(0.0, f64::max);
    let tol = cutoff(sigma_max, m.rows(), m.cols(), rel_tol);
    // X = V diag(1/s) U^H over the singular values above the cutoff
    let kept: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > tol).collect();
    Ok(ComplexMatrix::from_fn(m.cols(), m.rows(), |r, c| {
        kept.iter().map(|&i| v[(r, i)] * u[(c, i)].conj() / sv[i]).sum()
    }))
}

pub fn frobenius_norm_sq(m: &ComplexMatrix) -> Result<f64> {
    ensure_finite(m)?;
    Ok(m.norm_sq())
}
