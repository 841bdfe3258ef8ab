use std::cell::Cell;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

thread_local! {
    static MULTIPLY_ADDS: Cell<u64> = const { Cell::new(0) };
}

/// Multiply-add count accumulated by dense kernels on the current thread.
pub fn multiply_add_count() -> u64 {
    MULTIPLY_ADDS.with(|c| c.get())
}

pub fn reset_multiply_add_count() {
    MULTIPLY_ADDS.with(|c| c.set(0));
}

pub(crate) fn count_multiply_adds(n: u64) {
    MULTIPLY_ADDS.with(|c| c.set(c.get() + n));
}

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense2D {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl fmt::Debug for Dense2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dense2D {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            if r > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl Dense2D {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("matrix must be non-empty, got {rows}x{cols}")));
        }
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, values: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self { rows, cols, values: vec![value; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    pub fn scalar(value: f64) -> Self {
        Self { rows: 1, cols: 1, values: vec![value] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn column_vector(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
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
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Scalar value of a 1x1 matrix.
    pub fn item(&self) -> Option<f64> {
        (self.rows == 1 && self.cols == 1).then(|| self.values[0])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.values[c * self.rows + r] = self.values[r * self.cols + c];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Dense2D) -> Result<Dense2D> {
        if self.cols != other.rows {
            return Err(Error::dims("matmul", self.shape(), other.shape()));
        }
        let mut out = Dense2D::zeros(self.rows, other.cols);
        gemm_acc(self, false, other, false, &mut out);
        Ok(out)
    }

    /// Rows `start..end` as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Dense2D> {
        if start >= end || end > self.rows {
            return Err(Error::Shape(format!(
                "row range {start}..{end} invalid for {} rows",
                self.rows
            )));
        }
        Dense2D::new(end - start, self.cols, self.values[start * self.cols..end * self.cols].to_vec())
    }

    /// Stacks matrices with equal column count vertically.
    pub fn vstack(parts: &[&Dense2D]) -> Result<Dense2D> {
        let first = parts.first().ok_or_else(|| Error::Shape("vstack of nothing".into()))?;
        let cols = first.cols;
        let mut values = Vec::with_capacity(parts.iter().map(|p| p.values.len()).sum());
        let mut rows = 0;
        for p in parts {
            if p.cols != cols {
                return Err(Error::dims("vstack", first.shape(), p.shape()));
            }
            rows += p.rows;
            values.extend_from_slice(&p.values);
        }
        Dense2D::new(rows, cols, values)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn max_abs_diff(&self, other: &Dense2D) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff on different shapes");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn scale_in_place(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn add_assign(&mut self, other: &Dense2D) {
        assert_eq!(self.shape(), other.shape(), "add_assign on different shapes");
        self.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += b);
    }

    /// Index of the largest entry of row `r` (first on ties).
    pub fn argmax_row(&self, r: usize) -> usize {
        let row = self.row(r);
        let mut best = 0;
        for (i, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = i;
            }
        }
        best
    }
}

/// `out += op(a) * op(b)` where `op` optionally transposes.
pub(crate) fn gemm_acc(a: &Dense2D, trans_a: bool, b: &Dense2D, trans_b: bool, out: &mut Dense2D) {
    let (m, k) = if trans_a { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (kb, n) = if trans_b { (b.cols, b.rows) } else { (b.rows, b.cols) };
    assert_eq!(k, kb, "gemm inner dimension");
    assert_eq!(out.shape(), (m, n), "gemm output shape");
    let (rsa, csa) = if trans_a { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if trans_b { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    count_multiply_adds((m * k * n) as u64);
    // SAFETY: strides describe the row-major buffers of `a`, `b`, `out`, whose
    // lengths were checked against the shapes above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.values.as_ptr(),
            rsa,
            csa,
            b.values.as_ptr(),
            rsb,
            csb,
            1.0,
            out.values.as_mut_ptr(),
            out.cols as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_examples() {
        let a = Dense2D::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(Dense2D::identity(2).matmul(&a).unwrap(), a);
        let zero = Dense2D::zeros(2, 1);
        assert_eq!(a.matmul(&zero).unwrap(), zero);
        let b = Dense2D::column_vector(&[5.0, 6.0]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().values(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Dense2D::zeros(2, 3);
        let b = Dense2D::zeros(2, 3);
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3") && msg.contains("matmul"), "{msg}");
    }

    #[test]
    fn new_rejects_bad_lengths() {
        assert!(Dense2D::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Dense2D::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn transpose_and_slices() {
        let a = Dense2D::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let t = a.transpose();
        assert_eq!(t.shape(), (3, 2));
        assert_eq!(t.row(2), &[3.0, 6.0]);
        let s = Dense2D::vstack(&[&a, &a]).unwrap();
        assert_eq!(s.slice_rows(2, 4).unwrap(), a);
        assert_eq!(a.column(1), vec![2.0, 5.0]);
    }

    #[test]
    fn transposed_gemm_variants_agree() {
        let a = Dense2D::new(3, 2, vec![1.0, -2.0, 0.5, 3.0, 4.0, -1.0]).unwrap();
        let b = Dense2D::new(3, 4, (0..12).map(|i| i as f64 * 0.25 - 1.0).collect()).unwrap();
        let mut out = Dense2D::zeros(2, 4);
        gemm_acc(&a, true, &b, false, &mut out);
        assert!(out.max_abs_diff(&a.transpose().matmul(&b).unwrap()) < 1e-14);
        let mut out2 = Dense2D::zeros(3, 3);
        gemm_acc(&b, false, &b, true, &mut out2);
        assert!(out2.max_abs_diff(&b.matmul(&b.transpose()).unwrap()) < 1e-14);
    }
}
