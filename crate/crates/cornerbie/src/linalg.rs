//! Thin wrappers over the dense linear algebra backend.

use crate::{Error, Result};
use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;

/// Dense LU factorization with partial pivoting, reusable for many
/// right-hand sides in both the plain and transposed direction.
pub struct LuFactor {
    lu: PartialPivLu<f64>,
    n: usize,
}

impl LuFactor {
    pub fn new(a: &Mat<f64>) -> Result<Self> {
        Self::from_ref(a.as_ref())
    }

    pub fn from_ref(a: faer::MatRef<'_, f64>) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols());
        let n = a.nrows();
        let lu = a.partial_piv_lu();
        // Partial pivoting never fails structurally; detect numerical
        // singularity from the U diagonal.
        let u = lu.U();
        let mut dmax = 0.0f64;
        let mut dmin = f64::INFINITY;
        for i in 0..n {
            let d = u[(i, i)].abs();
            dmax = dmax.max(d);
            dmin = dmin.min(d);
        }
        if !(dmin > dmax * 1e-300) || !dmax.is_finite() {
            return Err(Error::SingularMatrix);
        }
        Ok(Self { lu, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        Ok((0..self.n).map(|i| x[(i, 0)]).collect())
    }

    /// Solve `A^T x = b` on the same factorization.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve_transpose(&rhs);
        Ok((0..self.n).map(|i| x[(i, 0)]).collect())
    }
}

/// Singular values of a dense matrix, descending.
pub fn singular_values(a: &Mat<f64>) -> Result<Vec<f64>> {
    let svd = a.svd().map_err(|_| Error::SingularMatrix)?;
    let s = svd.S();
    Ok((0..s.dim()).map(|k| s[k]).collect())
}

/// Full SVD `A = U diag(s) V^T`; returns `(u, s, v)`.
pub fn svd(a: &Mat<f64>) -> Result<(Mat<f64>, Vec<f64>, Mat<f64>)> {
    let svd = a.svd().map_err(|_| Error::SingularMatrix)?;
    let s = svd.S();
    let sv: Vec<f64> = (0..s.dim()).map(|k| s[k]).collect();
    Ok((svd.U().to_owned(), sv, svd.V().to_owned()))
}

/// 2-norm condition number.
pub fn cond_2(a: &Mat<f64>) -> Result<f64> {
    let s = singular_values(a)?;
    let smax = s.first().copied().unwrap_or(0.0);
    let smin = s.last().copied().unwrap_or(0.0);
    if smin == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(smax / smin)
}

/// Dense matrix-vector product `A x`.
pub fn matvec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), x.len());
    let mut out = vec![0.0; a.nrows()];
    // Column-major traversal.
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for i in 0..a.nrows() {
            out[i] += a[(i, j)] * xj;
        }
    }
    out
}

/// Dense transposed matrix-vector product `A^T x`.
pub fn matvec_transpose(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.nrows(), x.len());
    let mut out = vec![0.0; a.ncols()];
    for j in 0..a.ncols() {
        let mut acc = 0.0;
        for i in 0..a.nrows() {
            acc += a[(i, j)] * x[i];
        }
        out[j] = acc;
    }
    out
}

/// Solve the square system `A x = b` once (LU under the hood).
pub fn solve_dense(a: &Mat<f64>, b: &[f64]) -> Result<Vec<f64>> {
    LuFactor::new(a)?.solve(b)
}

/// Build a matrix from a row-major `Vec` without copying twice.
pub fn mat_from_row_major(n_rows: usize, n_cols: usize, data: &[f64]) -> Mat<f64> {
    assert_eq!(data.len(), n_rows * n_cols);
    Mat::from_fn(n_rows, n_cols, |i, j| data[i * n_cols + j])
}
