//! Minimal dense linear algebra.
//!
//! Matrices are stored column-major since every hot loop in the solvers
//! walks whole columns: a coordinate step reads `d_j` once, and a gradient
//! scan is a sequence of column dot products.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{HcdError, Result};
use crate::scalar::Scalar;

/// Owned vector of finite scalars.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DenseVector<T>(Vec<T>);

impl<T: Scalar> DenseVector<T> {
    pub fn zeros(len: usize) -> Self {
        Self(vec![T::zero(); len])
    }

    /// Wraps `data`, rejecting NaN and infinite entries.
    pub fn from_vec(data: Vec<T>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(HcdError::NonFinite("vector"));
        }
        Ok(Self(data))
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn norm2(&self) -> T {
        norm2(&self.0)
    }

    pub fn norm_inf(&self) -> T {
        self.0.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Number of entries that are not exactly zero.
    pub fn nnz(&self) -> usize {
        self.0.iter().filter(|v| **v != T::zero()).count()
    }

    /// Sorted indices of the entries that are not exactly zero.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != T::zero())
            .map(|(j, _)| j)
            .collect()
    }

    pub fn cast<U: Scalar>(&self) -> DenseVector<U> {
        DenseVector(self.0.iter().map(|v| U::lit(v.as_f64())).collect())
    }
}

impl<T> Deref for DenseVector<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T> DerefMut for DenseVector<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.0
    }
}

/// Column-major `rows x cols` matrix of finite scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for j in 0..n {
            m.data[j * n + j] = T::one();
        }
        m
    }

    pub fn from_column_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(HcdError::InvalidParameter(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(HcdError::DimensionMismatch {
                context: "matrix data",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(HcdError::NonFinite("matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices, all of equal length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = vec![T::zero(); n_rows * n_cols];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(HcdError::DimensionMismatch {
                    context: "matrix row",
                    expected: n_cols,
                    actual: row.len(),
                });
            }
            for (j, v) in row.iter().enumerate() {
                data[j * n_rows + i] = *v;
            }
        }
        Self::from_column_major(n_rows, n_cols, data)
    }

    pub fn from_columns(columns: &[Vec<T>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows * cols);
        for c in columns {
            if c.len() != rows {
                return Err(HcdError::DimensionMismatch {
                    context: "matrix column",
                    expected: rows,
                    actual: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Self::from_column_major(rows, cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub(crate) fn column_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn as_column_major(&self) -> &[T] {
        &self.data
    }

    pub fn cast<U: Scalar>(&self) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    fn check_col(&self, j: usize) -> Result<()> {
        if j >= self.cols {
            return Err(HcdError::IndexOutOfRange {
                index: j,
                len: self.cols,
            });
        }
        Ok(())
    }
}

/// Inner product with four independent accumulators, which lets the
/// compiler vectorize the loop.
#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail = ra.iter().zip(rb).fold(T::zero(), |s, (x, y)| s + *x * *y);
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// `M v`.
pub fn matvec<T: Scalar>(m: &DenseMatrix<T>, v: &[T]) -> Result<DenseVector<T>> {
    if v.len() != m.cols {
        return Err(HcdError::DimensionMismatch {
            context: "matvec",
            expected: m.cols,
            actual: v.len(),
        });
    }
    let mut out = vec![T::zero(); m.rows];
    for (j, &vj) in v.iter().enumerate() {
        if vj == T::zero() {
            continue;
        }
        for (o, &mij) in out.iter_mut().zip(m.column(j)) {
            *o += mij * vj;
        }
    }
    Ok(DenseVector(out))
}

/// `M^T v`, one column dot product per entry.
pub fn transpose_matvec<T: Scalar>(m: &DenseMatrix<T>, v: &[T]) -> Result<DenseVector<T>> {
    if v.len() != m.rows {
        return Err(HcdError::DimensionMismatch {
            context: "transpose_matvec",
            expected: m.rows,
            actual: v.len(),
        });
    }
    Ok(DenseVector((0..m.cols).map(|j| dot(m.column(j), v)).collect()))
}

/// `d_j^T v`.
pub fn column_dot<T: Scalar>(m: &DenseMatrix<T>, j: usize, v: &[T]) -> Result<T> {
    m.check_col(j)?;
    if v.len() != m.rows {
        return Err(HcdError::DimensionMismatch {
            context: "column_dot",
            expected: m.rows,
            actual: v.len(),
        });
    }
    Ok(dot(m.column(j), v))
}

/// Maintained residual `r = x - D alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual<T> {
    r: Vec<T>,
}

impl<T: Scalar> Residual<T> {
    /// Computes `x - D alpha` from scratch, skipping zero coefficients.
    pub fn compute(d: &DenseMatrix<T>, x: &[T], alpha: &[T]) -> Result<Self> {
        if x.len() != d.rows {
            return Err(HcdError::DimensionMismatch {
                context: "residual signal",
                expected: d.rows,
                actual: x.len(),
            });
        }
        let dx = matvec(d, alpha)?;
        Ok(Self {
            r: x.iter().zip(dx.iter()).map(|(a, b)| *a - *b).collect(),
        })
    }

    pub fn from_vec(r: Vec<T>) -> Self {
        Self { r }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.r
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn norm2(&self) -> T {
        norm2(&self.r)
    }

    /// Applies `alpha_j: old -> new`, i.e. `r <- r - d_j (new - old)`.
    pub fn coordinate_update(
        &mut self,
        d: &DenseMatrix<T>,
        j: usize,
        old: T,
        new: T,
    ) -> Result<()> {
        d.check_col(j)?;
        if self.r.len() != d.rows {
            return Err(HcdError::DimensionMismatch {
                context: "residual update",
                expected: d.rows,
                actual: self.r.len(),
            });
        }
        self.update_unchecked(d, j, new - old);
        Ok(())
    }

    #[inline]
    pub(crate) fn update_unchecked(&mut self, d: &DenseMatrix<T>, j: usize, delta: T) {
        if delta == T::zero() {
            return;
        }
        for (ri, &dij) in self.r.iter_mut().zip(d.column(j)) {
            *ri -= dij * delta;
        }
    }
}

/// Solves the symmetric positive definite system `G y = b` by Cholesky
/// factorization. `g` is row-major `n x n`. Returns `None` when a pivot is
/// not safely positive.
pub(crate) fn cholesky_solve<T: Scalar>(g: &[T], b: &[T], n: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    let scale = (0..n).fold(T::zero(), |m, i| m.max(g[i * n + i].abs()));
    let floor = scale * T::epsilon() * T::lit(n.max(1) as f64);
    for i in 0..n {
        for j in 0..=i {
            let mut s = g[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s.partial_cmp(&floor) != Some(std::cmp::Ordering::Greater) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    Some(y)
}
