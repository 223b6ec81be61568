//! Matrix and matrix-free linear operators.

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::scalar::{c, Real};

/// Safety factor applied to the power-iteration estimate of `‖AᵀA‖₂`.
pub const OPNORM_SAFETY: f64 = 1.01;

/// A linear map `ℝⁿ → ℝᵐ` together with its transpose.
///
/// Implementations write into caller-provided buffers so that iterative
/// solvers can run without allocating.
pub trait LinearMap<T: Real>: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `out = A x`; `x.len() == cols`, `out.len() == rows`.
    fn apply_to(&self, x: &[T], out: &mut [T]);
    /// `out = Aᵀ y`; `y.len() == rows`, `out.len() == cols`.
    fn apply_transpose_to(&self, y: &[T], out: &mut [T]);
}

/// Shared handle to a linear map with a cached operator-norm bound.
#[derive(Clone)]
pub struct LinearOperator<T: Real> {
    map: Arc<dyn LinearMap<T>>,
    opnorm_sq: Arc<OnceLock<T>>,
    label: Arc<str>,
}

impl<T: Real> fmt::Debug for LinearOperator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearOperator")
            .field("label", &self.label)
            .field("rows", &self.rows())
            .field("cols", &self.cols())
            .finish()
    }
}

impl<T: Real> LinearOperator<T> {
    pub fn new(label: &str, map: impl LinearMap<T> + 'static) -> Self {
        Self {
            map: Arc::new(map),
            opnorm_sq: Arc::new(OnceLock::new()),
            label: label.into(),
        }
    }

    /// Wraps a dense matrix.
    pub fn dense(label: &str, matrix: DMatrix<T>) -> Self {
        Self::new(label, DenseMap(matrix))
    }

    /// Wraps a sparse matrix; its transpose is built once here.
    pub fn sparse(label: &str, matrix: CsrMatrix<T>) -> Self {
        Self::new(label, SparseMap::new(matrix))
    }

    /// The `n × n` identity.
    pub fn identity(n: usize) -> Self {
        Self::new("identity", Identity(n))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn rows(&self) -> usize {
        self.map.rows()
    }

    pub fn cols(&self) -> usize {
        self.map.cols()
    }

    pub fn apply_to(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols());
        debug_assert_eq!(out.len(), self.rows());
        self.map.apply_to(x, out);
    }

    pub fn apply_transpose_to(&self, y: &[T], out: &mut [T]) {
        debug_assert_eq!(y.len(), self.rows());
        debug_assert_eq!(out.len(), self.cols());
        self.map.apply_transpose_to(y, out);
    }

    pub fn apply(&self, x: &DVector<T>) -> DVector<T> {
        let mut out = DVector::zeros(self.rows());
        self.apply_to(x.as_slice(), out.as_mut_slice());
        out
    }

    pub fn apply_transpose(&self, y: &DVector<T>) -> DVector<T> {
        let mut out = DVector::zeros(self.cols());
        self.apply_transpose_to(y.as_slice(), out.as_mut_slice());
        out
    }

    /// Upper bound on `‖AᵀA‖₂`: power iteration on `AᵀA` times
    /// [`OPNORM_SAFETY`]. Computed once and shared between clones.
    pub fn opnorm_sq_estimate(&self) -> T {
        *self.opnorm_sq.get_or_init(|| power_iteration_normal(self) * c::<T>(OPNORM_SAFETY))
    }

    /// Materializes the operator column by column.
    pub fn to_dense(&self) -> DMatrix<T> {
        let (m, n) = (self.rows(), self.cols());
        let mut out = DMatrix::zeros(m, n);
        let mut e = vec![T::zero(); n];
        let mut col = vec![T::zero(); m];
        for j in 0..n {
            e[j] = T::one();
            self.apply_to(&e, &mut col);
            out.column_mut(j).copy_from_slice(&col);
            e[j] = T::zero();
        }
        out
    }

    /// Dense `AᵀA`.
    pub fn normal_matrix(&self) -> DMatrix<T> {
        let n = self.cols();
        let mut out = DMatrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        let mut img = vec![T::zero(); self.rows()];
        let mut col = vec![T::zero(); n];
        for j in 0..n {
            e[j] = T::one();
            self.apply_to(&e, &mut img);
            self.apply_transpose_to(&img, &mut col);
            out.column_mut(j).copy_from_slice(&col);
            e[j] = T::zero();
        }
        out
    }
}

/// Largest eigenvalue of `AᵀA` by power iteration from a fixed start vector.
fn power_iteration_normal<T: Real>(op: &LinearOperator<T>) -> T {
    let n = op.cols();
    if n == 0 || op.rows() == 0 {
        return T::zero();
    }
    // deterministic start with components in every direction
    let mut v = DVector::from_fn(n, |i, _| c::<T>(1.0 + 0.37 * ((i * 7919 % 101) as f64) / 101.0));
    let mut img = DVector::zeros(op.rows());
    let mut w = DVector::zeros(n);
    let mut estimate = T::zero();
    for _ in 0..2000 {
        let norm = v.norm();
        if norm == T::zero() {
            return T::zero();
        }
        v /= norm;
        op.apply_to(v.as_slice(), img.as_mut_slice());
        op.apply_transpose_to(img.as_slice(), w.as_mut_slice());
        let next = v.dot(&w);
        std::mem::swap(&mut v, &mut w);
        let converged = (next - estimate).abs() <= c::<T>(1e-12) * next.abs();
        estimate = next;
        if converged {
            break;
        }
    }
    estimate
}

/// Relative adjoint mismatch `|⟨Au, v⟩ − ⟨u, Aᵀv⟩| / (‖Au‖‖v‖ + ‖u‖‖Aᵀv‖)`.
pub fn adjoint_mismatch<T: Real>(op: &LinearOperator<T>, u: &DVector<T>, v: &DVector<T>) -> T {
    let au = op.apply(u);
    let atv = op.apply_transpose(v);
    let lhs = au.dot(v);
    let rhs = u.dot(&atv);
    let scale = au.norm() * v.norm() + u.norm() * atv.norm();
    if scale == T::zero() {
        T::zero()
    } else {
        (lhs - rhs).abs() / scale
    }
}

struct DenseMap<T: Real>(DMatrix<T>);

impl<T: Real> LinearMap<T> for DenseMap<T> {
    fn rows(&self) -> usize {
        self.0.nrows()
    }

    fn cols(&self) -> usize {
        self.0.ncols()
    }

    fn apply_to(&self, x: &[T], out: &mut [T]) {
        let (m, n) = self.0.shape();
        out.iter_mut().for_each(|o| *o = T::zero());
        // column-major storage: accumulate column by column
        for (j, &xj) in x.iter().enumerate().take(n) {
            if xj == T::zero() {
                continue;
            }
            let col = &self.0.as_slice()[j * m..(j + 1) * m];
            for (o, &a) in out.iter_mut().zip(col) {
                *o += a * xj;
            }
        }
    }

    fn apply_transpose_to(&self, y: &[T], out: &mut [T]) {
        let m = self.0.nrows();
        for (j, o) in out.iter_mut().enumerate() {
            let col = &self.0.as_slice()[j * m..(j + 1) * m];
            *o = col.iter().zip(y).map(|(&a, &b)| a * b).sum();
        }
    }
}

struct Identity(usize);

impl<T: Real> LinearMap<T> for Identity {
    fn rows(&self) -> usize {
        self.0
    }

    fn cols(&self) -> usize {
        self.0
    }

    fn apply_to(&self, x: &[T], out: &mut [T]) {
        out.copy_from_slice(x);
    }

    fn apply_transpose_to(&self, y: &[T], out: &mut [T]) {
        out.copy_from_slice(y);
    }
}

/// Compressed sparse row matrix with a precomputed transpose.
#[derive(Debug, Clone)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds from per-row `(column, value)` lists. Duplicate columns in a
    /// row are summed.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, T)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows.iter().cloned() {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                assert!(j < cols, "column index out of range");
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            rows: rows.len(),
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn transpose(&self) -> Self {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); self.cols];
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                rows[j].push((i, v));
            }
        }
        Self::from_rows(self.rows, rows)
    }

    fn spmv(&self, x: &[T], out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            let range = self.row_ptr[i]..self.row_ptr[i + 1];
            *o = self.col_idx[range.clone()].iter().zip(&self.values[range]).map(|(&j, &v)| v * x[j]).sum();
        }
    }
}

/// Sparse operator: CSR matrix and its transpose.
pub struct SparseMap<T: Real> {
    forward: CsrMatrix<T>,
    adjoint: CsrMatrix<T>,
}

impl<T: Real> SparseMap<T> {
    pub fn new(forward: CsrMatrix<T>) -> Self {
        let adjoint = forward.transpose();
        Self { forward, adjoint }
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.forward
    }
}

impl<T: Real> LinearMap<T> for SparseMap<T> {
    fn rows(&self) -> usize {
        self.forward.rows
    }

    fn cols(&self) -> usize {
        self.forward.cols
    }

    fn apply_to(&self, x: &[T], out: &mut [T]) {
        self.forward.spmv(x, out);
    }

    fn apply_transpose_to(&self, y: &[T], out: &mut [T]) {
        self.adjoint.spmv(y, out);
    }
}
