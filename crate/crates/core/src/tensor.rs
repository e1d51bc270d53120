//! Dense third-order tensors and the t-product.
//!
//! # Layout
//!
//! A [`Tensor3`] of dims `(m, l, n)` stores entry `(i, j, k)` (0-based) at
//! linear offset `(i * l + j) * n + k`. Tube fibers `t(i, j, :)` are therefore
//! contiguous, and a row slice `t(i, :, :)` is one contiguous block of `l * n`
//! values. Every file format and conversion in this crate uses this layout.
//!
//! Matrices are the `n = 1` case.

use nalgebra::DMatrix;

use crate::error::TensorError;

/// Dense real matrix used by the explicit block-circulant routes.
pub type Matrix = DMatrix<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(m: usize, l: usize, n: usize) -> Self {
        Self {
            dims: (m, l, n),
            data: vec![0.0; m * l * n],
        }
    }

    pub fn from_vec(m: usize, l: usize, n: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        if m == 0 || l == 0 || n == 0 {
            return Err(TensorError::ZeroDimension { dims: (m, l, n) });
        }
        if data.len() != m * l * n {
            return Err(TensorError::DataLength {
                dims: (m, l, n),
                len: data.len(),
            });
        }
        Ok(Self {
            dims: (m, l, n),
            data,
        })
    }

    /// Builds a tensor by evaluating `f(i, j, k)` at every 0-based index.
    pub fn from_fn(m: usize, l: usize, n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(m * l * n);
        for i in 0..m {
            for j in 0..l {
                for k in 0..n {
                    data.push(f(i, j, k));
                }
            }
        }
        Self {
            dims: (m, l, n),
            data,
        }
    }

    /// A constant-valued tensor.
    pub fn filled(m: usize, l: usize, n: usize, value: f64) -> Self {
        Self {
            dims: (m, l, n),
            data: vec![value; m * l * n],
        }
    }

    /// The t-identity: first frontal slice is `I_size`, the rest are zero.
    pub fn t_identity(size: usize, n: usize) -> Self {
        Self::from_fn(size, size, n, |i, j, k| if i == j && k == 0 { 1.0 } else { 0.0 })
    }

    /// Wraps an `m x l` matrix as an `m x l x 1` tensor.
    pub fn from_matrix(mat: &Matrix) -> Self {
        Self::from_fn(mat.nrows(), mat.ncols(), 1, |i, j, _| mat[(i, j)])
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        let (_, l, n) = self.dims;
        (i * l + j) * n + k
    }

    fn check_index(&self, i: usize, j: usize, k: usize) -> Result<(), TensorError> {
        let (m, l, n) = self.dims;
        if i >= m || j >= l || k >= n {
            return Err(TensorError::IndexOutOfRange {
                index: (i, j, k),
                dims: self.dims,
            });
        }
        Ok(())
    }

    /// Checked 0-based entry access.
    pub fn get(&self, i: usize, j: usize, k: usize) -> Result<f64, TensorError> {
        self.check_index(i, j, k)?;
        Ok(self.data[self.offset(i, j, k)])
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) -> Result<(), TensorError> {
        self.check_index(i, j, k)?;
        let off = self.offset(i, j, k);
        self.data[off] = value;
        Ok(())
    }

    /// Unchecked accessor for hot loops; panics on out-of-range indices.
    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        debug_assert!(self.check_index(i, j, k).is_ok());
        self.data[self.offset(i, j, k)]
    }

    /// The contiguous tube `t(i, j, :)`.
    #[inline]
    pub fn tube(&self, i: usize, j: usize) -> &[f64] {
        let n = self.dims.2;
        let start = self.offset(i, j, 0);
        &self.data[start..start + n]
    }

    /// The contiguous storage of row slice `t(i, :, :)`.
    #[inline]
    pub fn row_slice_data(&self, i: usize) -> &[f64] {
        let (_, l, n) = self.dims;
        &self.data[i * l * n..(i + 1) * l * n]
    }

    #[inline]
    pub fn row_slice_data_mut(&mut self, i: usize) -> &mut [f64] {
        let (_, l, n) = self.dims;
        &mut self.data[i * l * n..(i + 1) * l * n]
    }

    /// Row slice `t(i, :, :)` as a `1 x l x n` tensor.
    pub fn row_slice(&self, i: usize) -> Result<Self, TensorError> {
        let (m, l, n) = self.dims;
        if i >= m {
            return Err(TensorError::IndexOutOfRange {
                index: (i, 0, 0),
                dims: self.dims,
            });
        }
        Ok(Self {
            dims: (1, l, n),
            data: self.row_slice_data(i).to_vec(),
        })
    }

    /// Rows `rows` stacked into a new `|rows| x l x n` tensor.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self, TensorError> {
        let (_, l, n) = self.dims;
        let mut data = Vec::with_capacity(rows.len() * l * n);
        for &i in rows {
            data.extend_from_slice(self.row_slice(i)?.as_slice());
        }
        Self::from_vec(rows.len(), l, n, data)
    }

    /// Stacks tensors with matching `(l, n)` along the first mode.
    pub fn vstack(parts: &[&Tensor3]) -> Result<Self, TensorError> {
        let first = parts.first().ok_or(TensorError::ZeroDimension { dims: (0, 0, 0) })?;
        let (_, l, n) = first.dims;
        let mut m = 0;
        let mut data = Vec::new();
        for t in parts {
            if (t.dims.1, t.dims.2) != (l, n) {
                return Err(TensorError::DimensionMismatch {
                    op: "vstack",
                    left: first.dims,
                    right: t.dims,
                });
            }
            m += t.dims.0;
            data.extend_from_slice(&t.data);
        }
        Self::from_vec(m, l, n, data)
    }

    /// Frontal slice `t(:, :, k)` as an `m x l` matrix.
    pub fn frontal_slice(&self, k: usize) -> Matrix {
        let (m, l, _) = self.dims;
        Matrix::from_fn(m, l, |i, j| self.at(i, j, k))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_with(&self, other: &Self, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self, TensorError> {
        self.require_same_dims(other, op)?;
        Ok(Self {
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn require_same_dims(&self, other: &Self, op: &'static str) -> Result<(), TensorError> {
        if self.dims != other.dims {
            return Err(TensorError::DimensionMismatch {
                op,
                left: self.dims,
                right: other.dims,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, TensorError> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, TensorError> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// Entrywise minimum with `other`.
    pub fn min_with(&self, other: &Self) -> Result<Self, TensorError> {
        self.zip_with(other, "min", f64::min)
    }

    /// Entrywise maximum with `other`.
    pub fn max_with(&self, other: &Self) -> Result<Self, TensorError> {
        self.zip_with(other, "max", f64::max)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn frob_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// Frontal slices stacked vertically: an `(m n) x l` matrix.
pub fn unfold(t: &Tensor3) -> Matrix {
    let (m, l, _) = t.dims();
    Matrix::from_fn(m * t.dims().2, l, |r, j| t.at(r % m, j, r / m))
}

/// Inverse of [`unfold`] for a tensor with `n` frontal slices.
pub fn fold(mat: &Matrix, n: usize) -> Result<Tensor3, TensorError> {
    if n == 0 || !mat.nrows().is_multiple_of(n) {
        return Err(TensorError::FoldShape {
            rows: mat.nrows(),
            n,
        });
    }
    let m = mat.nrows() / n;
    let t = Tensor3::from_fn(m, mat.ncols(), n, |i, j, k| mat[(k * m + i, j)]);
    if t.is_empty() {
        return Err(TensorError::ZeroDimension { dims: t.dims() });
    }
    Ok(t)
}

/// Block-circulant matrix: block `(r, c)` is frontal slice `(r - c) mod n`.
pub fn bcirc(t: &Tensor3) -> Matrix {
    let (m, l, n) = t.dims();
    Matrix::from_fn(m * n, l * n, |row, col| {
        let (r, i) = (row / m, row % m);
        let (c, j) = (col / l, col % l);
        t.at(i, j, (r + n - c) % n)
    })
}

/// Tensor transpose: slice 0 transposed, slices 1.. transposed and reversed.
pub fn t_transpose(t: &Tensor3) -> Tensor3 {
    let (m, l, n) = t.dims();
    Tensor3::from_fn(l, m, n, |i, j, k| t.at(j, i, (n - k) % n))
}

pub fn frob_norm(t: &Tensor3) -> f64 {
    t.frob_norm_sq().sqrt()
}

pub fn inner(a: &Tensor3, b: &Tensor3) -> Result<f64, TensorError> {
    a.require_same_dims(b, "inner")?;
    Ok(a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum())
}

fn check_tprod_dims(a: &Tensor3, x: &Tensor3) -> Result<(), TensorError> {
    let (_, l, n) = a.dims();
    let (lx, _, nx) = x.dims();
    if l != lx || n != nx {
        return Err(TensorError::DimensionMismatch {
            op: "t-product",
            left: a.dims(),
            right: x.dims(),
        });
    }
    Ok(())
}

/// Reference t-product `fold(bcirc(a) * unfold(x))`.
pub fn tprod_naive(a: &Tensor3, x: &Tensor3) -> Result<Tensor3, TensorError> {
    check_tprod_dims(a, x)?;
    let n = a.dims().2;
    fold(&(bcirc(a) * unfold(x)), n)
}

/// Entrywise `max(t, 0)`.
pub fn positive_part(t: &Tensor3) -> Tensor3 {
    t.map(|v| v.max(0.0))
}

pub(crate) fn require_tprod_dims(a: (usize, usize, usize), x: (usize, usize, usize)) -> Result<(), TensorError> {
    if a.1 != x.0 || a.2 != x.2 {
        return Err(TensorError::DimensionMismatch {
            op: "t-product",
            left: a,
            right: x,
        });
    }
    Ok(())
}
