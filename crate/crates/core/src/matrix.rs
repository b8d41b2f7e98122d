//! Dense row-major matrices and their CSV text format.

use std::fmt::Write as _;
use std::ops::{Index, IndexMut};
use std::path::Path;

use crate::error::{shape_err, Error, Result};
use crate::scalar::Real;

/// Dense real matrix stored row-major.
///
/// Public constructors reject non-finite entries. Zero-sized matrices are
/// representable (an empty column selection, for instance) but no public
/// operation produces one from non-empty input unless documented.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
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

    /// Builds a matrix from row-major data, validating size and finiteness.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has {} entries, expected {n_cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(n_rows, n_cols, data)
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

    pub fn from_diag(diag: &[T]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { diag[i] } else { T::zero() })
    }

    /// Column vector from a slice.
    pub fn column(values: &[T]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
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
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
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

    pub fn col_vec(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(shape_err("matmul", self.shape(), other.shape()));
        }
        Ok(self.mm(other))
    }

    /// `self^T * other`.
    pub fn tr_matmul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(shape_err("tr_matmul", self.shape(), other.shape()));
        }
        Ok(self.tmm(other))
    }

    /// `self * other^T`.
    pub fn matmul_tr(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(shape_err("matmul_tr", self.shape(), other.shape()));
        }
        Ok(self.mmt(other))
    }

    pub(crate) fn mm(&self, b: &Self) -> Self {
        debug_assert_eq!(self.cols, b.rows);
        let mut c = Self::zeros(self.rows, b.cols);
        gemm_into(
            self.rows,
            self.cols,
            b.cols,
            &self.data,
            (self.cols as isize, 1),
            &b.data,
            (b.cols as isize, 1),
            &mut c,
        );
        c
    }

    pub(crate) fn tmm(&self, b: &Self) -> Self {
        debug_assert_eq!(self.rows, b.rows);
        let mut c = Self::zeros(self.cols, b.cols);
        gemm_into(
            self.cols,
            self.rows,
            b.cols,
            &self.data,
            (1, self.cols as isize),
            &b.data,
            (b.cols as isize, 1),
            &mut c,
        );
        c
    }

    pub(crate) fn mmt(&self, b: &Self) -> Self {
        debug_assert_eq!(self.cols, b.cols);
        let mut c = Self::zeros(self.rows, b.rows);
        gemm_into(
            self.rows,
            self.cols,
            b.rows,
            &self.data,
            (self.cols as isize, 1),
            &b.data,
            (1, b.cols as isize),
            &mut c,
        );
        c
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with("add", other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with("sub", other, |a, b| a - b)
    }

    fn zip_with(&self, op: &'static str, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(shape_err(op, self.shape(), other.shape()));
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

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self += alpha * x`.
    pub(crate) fn axpy(&mut self, alpha: T, x: &Self) {
        debug_assert_eq!(self.shape(), x.shape());
        for (a, &b) in self.data.iter_mut().zip(&x.data) {
            *a = *a + alpha * b;
        }
    }

    /// `self + alpha * x` without mutating either operand.
    pub(crate) fn plus_scaled(&self, alpha: T, x: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(alpha, x);
        out
    }

    pub fn frobenius_norm(&self) -> T {
        self.frobenius_dot(self).sqrt()
    }

    /// Trace inner product `tr(self^T other)`.
    pub fn frobenius_dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Euclidean norm of every row.
    pub fn row_norms(&self) -> Vec<T> {
        (0..self.rows)
            .map(|i| self.row(i).iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt())
            .collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn select_cols(&self, idx: &[usize]) -> Self {
        Self::from_fn(self.rows, idx.len(), |i, j| self[(i, idx[j])])
    }

    /// The first `k` rows.
    pub fn row_prefix(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.rows {
            return Err(Error::InvalidArgument(format!(
                "row prefix {k} out of range 1..={}",
                self.rows
            )));
        }
        Ok(Self {
            rows: k,
            cols: self.cols,
            data: self.data[..k * self.cols].to_vec(),
        })
    }

    /// Converts between scalar types (`f64` <-> `f32`).
    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    /// One line per row, comma-separated, 17 significant digits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.data.len() * 24);
        for i in 0..self.rows {
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{:.16e}", v);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<T>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|tok| {
                    let tok = tok.trim();
                    tok.parse::<T>().map_err(|_| Error::Parse {
                        line: lineno + 1,
                        msg: format!("cannot parse {tok:?} as a number"),
                    })
                })
                .collect::<Result<Vec<T>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                line: 0,
                msg: "empty matrix file".into(),
            });
        }
        Self::from_rows(&rows)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }
}

#[allow(clippy::too_many_arguments)]
fn gemm_into<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    (rsa, csa): (isize, isize),
    b: &[T],
    (rsb, csb): (isize, isize),
    c: &mut Matrix<T>,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.data.iter_mut().for_each(|v| *v = T::zero());
        return;
    }
    let rsc = c.cols as isize;
    // SAFETY: the slices cover m x k, k x n and m x n views with the given
    // strides, and `c` is uniquely borrowed.
    unsafe {
        T::gemm(
            m,
            k,
            n,
            T::one(),
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            T::zero(),
            c.data.as_mut_ptr(),
            rsc,
            1,
        );
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn products_agree_with_hand_values() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let b = m(&[&[1.0, 0.0, -1.0], &[2.0, 1.0, 0.0]]);
        assert_eq!(
            a.matmul(&b).unwrap(),
            m(&[&[5.0, 2.0, -1.0], &[11.0, 4.0, -3.0], &[17.0, 6.0, -5.0]])
        );
        assert_eq!(a.tr_matmul(&a).unwrap(), m(&[&[35.0, 44.0], &[44.0, 56.0]]));
        assert_eq!(
            b.matmul_tr(&b).unwrap(),
            m(&[&[2.0, 2.0], &[2.0, 5.0]])
        );
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn rejects_non_finite_and_ragged_input() {
        assert!(Matrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::from_vec(1, 2, vec![1.0]).is_err());
        assert!(Matrix::<f64>::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let a = m(&[&[0.1, -1.0 / 3.0], &[1e-300, 6.02214076e23]]);
        let text = a.to_csv_string();
        assert_eq!(Matrix::<f64>::from_csv_str(&text).unwrap(), a);
        let parsed = Matrix::<f64>::from_csv_str("1e-3, 2.5E2\n\n-4,0\n").unwrap();
        assert_eq!(parsed, m(&[&[1e-3, 250.0], &[-4.0, 0.0]]));
        assert!(Matrix::<f64>::from_csv_str("1,x\n").is_err());
        assert!(Matrix::<f64>::from_csv_str("1,nan\n").is_err());
    }

    #[test]
    fn row_prefix_bounds() {
        let a = m(&[&[1.0], &[2.0], &[3.0]]);
        assert_eq!(a.row_prefix(2).unwrap(), m(&[&[1.0], &[2.0]]));
        assert!(a.row_prefix(0).is_err());
        assert!(a.row_prefix(4).is_err());
    }
}
