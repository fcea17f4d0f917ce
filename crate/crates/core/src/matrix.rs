//! Row-major dense matrices and the handful of kernels the solvers need.

use std::fmt;
use std::ops::{Index, IndexMut};

use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::scalar::Scalar;

/// Work (multiply-adds) above which products fan out over rows with rayon.
/// Every output row is computed by the same sequential loop either way, so
/// results do not depend on the thread count.
const PAR_THRESHOLD: usize = 1 << 18;

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    /// Wraps `data` (row-major). Fails if the length is wrong or any entry is not finite.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(param(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows; convenient in tests.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(param(format!("row {i} has {} entries, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn diag(values: &[T]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    /// Selects a subset of columns, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> Self {
        Self::from_fn(self.rows, idx.len(), |i, j| self[(i, idx[j])])
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn frobenius_norm_sq(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    /// `self + s * other`
    pub fn add_scaled(&self, other: &Self, s: T) -> Result<Self> {
        self.zip_with(other, "add_scaled", |a, b| a + s * b)
    }

    /// Adds `s` to every diagonal entry of a square matrix.
    pub fn add_diagonal(&self, s: T) -> Result<Self> {
        if self.rows != self.cols {
            return Err(Error::Shape {
                op: "add_diagonal",
                left: self.shape(),
                right: self.shape(),
            });
        }
        let mut out = self.clone();
        for i in 0..self.rows {
            out.data[i * self.cols + i] += s;
        }
        Ok(out)
    }

    fn zip_with(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Shape {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Squared Frobenius distance `‖self − other‖²`.
    pub fn dist_sq(&self, other: &Self) -> Result<T> {
        if self.shape() != other.shape() {
            return Err(Error::Shape {
                op: "dist_sq",
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum())
    }

    /// Largest entry-wise asymmetry `|a_ij − a_ji|`, or `None` when not square.
    pub fn asymmetry(&self) -> Option<T> {
        if self.rows != self.cols {
            return None;
        }
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        Some(worst)
    }

    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    fn ensure_finite(self, op: &str) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::Numerical(format!("{op} produced a non-finite entry")))
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let shown: Vec<String> = row.iter().take(8).map(|v| format!("{v:.6?}")).collect();
            let tail = if self.cols > 8 { ", ..." } else { "" };
            writeln!(f, "  [{}{tail}]", shown.join(", "))?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

/// Four interleaved partial sums so the loop vectorises; the summation order
/// is fixed, so results stay deterministic.
#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn fill_rows<T: Scalar>(out: &mut Matrix<T>, work: usize, f: impl Fn(usize, &mut [T]) + Sync) {
    let cols = out.cols.max(1);
    if work >= PAR_THRESHOLD {
        out.data
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    } else {
        out.data
            .chunks_mut(cols)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
}

/// `a · b`
pub fn matmul<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.cols != b.rows {
        return Err(Error::Shape {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    if b.cols == 0 {
        return Ok(out);
    }
    fill_rows(&mut out, a.rows * a.cols * b.cols, |i, row| {
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik != T::zero() {
                axpy(aik, b.row(k), row);
            }
        }
    });
    out.ensure_finite("matmul")
}

/// `a · bᵀ`; exactly symmetric when `a` and `b` are the same matrix.
pub fn matmul_nt<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.cols != b.cols {
        return Err(Error::Shape {
            op: "matmul_nt",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut out = Matrix::zeros(a.rows, b.rows);
    if b.rows == 0 {
        return Ok(out);
    }
    fill_rows(&mut out, a.rows * a.cols * b.rows, |i, row| {
        let ai = a.row(i);
        for (j, o) in row.iter_mut().enumerate() {
            *o = dot(ai, b.row(j));
        }
    });
    out.ensure_finite("matmul_nt")
}

/// `aᵀ · b`; exactly symmetric when `a` and `b` are the same matrix.
pub fn matmul_tn<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.rows != b.rows {
        return Err(Error::Shape {
            op: "matmul_tn",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut out = Matrix::zeros(a.cols, b.cols);
    if b.cols == 0 {
        return Ok(out);
    }
    fill_rows(&mut out, a.rows * a.cols * b.cols, |i, row| {
        for k in 0..a.rows {
            let aki = a[(k, i)];
            if aki != T::zero() {
                axpy(aki, b.row(k), row);
            }
        }
    });
    out.ensure_finite("matmul_tn")
}

/// Lower-triangular Cholesky factor `L` with `a = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    factor: Matrix<T>,
    /// `Lᵀ`, kept so back substitution reads rows.
    upper: Matrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factors a symmetric positive-definite matrix. Only the lower triangle is read;
    /// callers that need a symmetry check go through [`spd_solve`].
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::Shape {
                op: "cholesky",
                left: a.shape(),
                right: a.shape(),
            });
        }
        let n = a.rows;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let (row_j, below) = l.data[j * n..].split_at_mut(n);
            let mut d = a[(j, j)];
            for &v in &row_j[..j] {
                d -= v * v;
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::Singular {
                    pivot: j,
                    value: d.as_f64(),
                });
            }
            let djj = d.sqrt();
            row_j[j] = djj;
            for (off, row_i) in below.chunks_mut(n).enumerate() {
                let s = a[(j + 1 + off, j)] - dot(&row_i[..j], &row_j[..j]);
                row_i[j] = s / djj;
            }
        }
        let upper = l.transpose();
        Ok(Self { factor: l, upper })
    }

    pub fn dim(&self) -> usize {
        self.factor.rows
    }

    pub fn lower(&self) -> &Matrix<T> {
        &self.factor
    }

    fn solve_vec(&self, v: &mut [T]) {
        let n = self.factor.rows;
        let l = &self.factor;
        for i in 0..n {
            let s = v[i] - dot(&l.row(i)[..i], &v[..i]);
            v[i] = s / l[(i, i)];
        }
        let u = &self.upper;
        for i in (0..n).rev() {
            let s = v[i] - dot(&u.row(i)[i + 1..], &v[i + 1..]);
            v[i] = s / u[(i, i)];
        }
    }

    /// Solves `a · x = b` for every column of `b`.
    pub fn solve(&self, b: &Matrix<T>) -> Result<Matrix<T>> {
        if b.rows != self.dim() {
            return Err(Error::Shape {
                op: "cholesky_solve",
                left: self.factor.shape(),
                right: b.shape(),
            });
        }
        Ok(self.solve_right(&b.transpose())?.transpose())
    }

    /// Returns `rhs · a⁻¹`, solving one row of `rhs` at a time.
    pub fn solve_right(&self, rhs: &Matrix<T>) -> Result<Matrix<T>> {
        let n = self.dim();
        if rhs.cols != n {
            return Err(Error::Shape {
                op: "cholesky_solve_right",
                left: rhs.shape(),
                right: self.factor.shape(),
            });
        }
        let mut out = rhs.clone();
        if n == 0 {
            return Ok(out);
        }
        if rhs.rows * n * n >= PAR_THRESHOLD {
            out.data.par_chunks_mut(n).for_each(|r| self.solve_vec(r));
        } else {
            out.data.chunks_mut(n).for_each(|r| self.solve_vec(r));
        }
        out.ensure_finite("cholesky_solve")
    }
}

/// Symmetry tolerance for [`spd_solve`], relative to the entry magnitude.
const SYMMETRY_TOL: f64 = 1e-10;

/// Solves `a · x = b` for symmetric positive-definite `a`.
pub fn spd_solve<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.rows != a.cols || a.rows != b.rows {
        return Err(Error::Shape {
            op: "spd_solve",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let tol = T::lit(SYMMETRY_TOL);
    for i in 0..a.rows {
        for j in 0..i {
            let (x, y) = (a[(i, j)], a[(j, i)]);
            if (x - y).abs() > tol * (T::one() + x.abs().max(y.abs())) {
                return Err(param(format!(
                    "spd_solve: matrix is not symmetric at ({i}, {j}): {x} vs {y}"
                )));
            }
        }
    }
    Cholesky::factor(a)?.solve(b)
}

/// Returns `rhs · (g + eps·I)⁻¹`, the minimiser `W` of `‖B − W H‖² + eps‖W‖²`
/// when `g = H Hᵀ` and `rhs = B Hᵀ`.
pub fn ridge_right_solve<T: Scalar>(g: &Matrix<T>, rhs: &Matrix<T>, eps: T) -> Result<Matrix<T>> {
    if !(eps > T::zero()) {
        return Err(param(format!("ridge eps must be positive, got {eps}")));
    }
    if g.rows != g.cols || rhs.cols != g.rows {
        return Err(Error::Shape {
            op: "ridge_right_solve",
            left: rhs.shape(),
            right: g.shape(),
        });
    }
    Cholesky::factor(&g.add_diagonal(eps)?)?.solve_right(rhs)
}
