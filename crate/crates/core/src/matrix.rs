//! Dense row-major `f64` matrix with the handful of operations this crate
//! needs: products, transpose, pivoted inversion, and a smallest-singular-value
//! estimate. Serialized as nested numeric arrays.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(Matrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    /// Build from a function of (row, col).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, f(r, c));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self * x` for a column vector `x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "matmul: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = out.row_mut(r);
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Exact inverse by Gauss-Jordan elimination with partial pivoting.
    ///
    /// Fails with the minimum pivot encountered when the matrix is singular to
    /// `tol`.
    pub fn inverse(&self, tol: f64) -> Result<Matrix> {
        if self.rows != self.cols {
            return Err(Error::Dimension("inverse of non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Matrix::identity(n);
        let mut min_pivot = f64::INFINITY;
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&i, &j| {
                    a.get(i, col).abs().partial_cmp(&a.get(j, col).abs()).unwrap()
                })
                .unwrap();
            let pivot = a.get(pivot_row, col);
            min_pivot = min_pivot.min(pivot.abs());
            if pivot.abs() <= tol {
                return Err(Error::Singular { min_pivot: pivot.abs() });
            }
            if pivot_row != col {
                a.swap_rows(pivot_row, col);
                inv.swap_rows(pivot_row, col);
            }
            let inv_pivot = 1.0 / a.get(col, col);
            for v in a.row_mut(col) {
                *v *= inv_pivot;
            }
            for v in inv.row_mut(col) {
                *v *= inv_pivot;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a.get(r, col);
                if factor == 0.0 {
                    continue;
                }
                for c in 0..n {
                    let v = a.get(col, c);
                    if v != 0.0 {
                        *a.row_mut(r).get_mut(c).unwrap() -= factor * v;
                    }
                    let w = inv.get(col, c);
                    if w != 0.0 {
                        *inv.row_mut(r).get_mut(c).unwrap() -= factor * w;
                    }
                }
            }
        }
        Ok(inv)
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for c in 0..self.cols {
            let tmp = self.get(i, c);
            self.set(i, c, self.get(j, c));
            self.set(j, c, tmp);
        }
    }

    /// Estimate the smallest singular value by power iteration on
    /// `inv * inv^T` (valid for square invertible matrices).
    pub fn min_singular_estimate(&self, tol: f64) -> Result<f64> {
        let inv = self.inverse(tol)?;
        let inv_t = inv.transpose();
        // Power iteration for the largest eigenvalue of inv*inv^T; the
        // smallest singular value of self is its inverse square root.
        let n = self.rows;
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut lambda = 0.0;
        for _ in 0..50 {
            let w = inv_t.matvec(&v);
            let mut u = inv.matvec(&w);
            let norm: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Ok(0.0);
            }
            for x in &mut u {
                *x /= norm;
            }
            lambda = norm;
            v = u;
        }
        Ok(1.0 / lambda.sqrt())
    }
}

// Serialized as nested arrays so model files read as plain numeric tables.
impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<&[f64]> = (0..self.rows).map(|r| self.row(r)).collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        Matrix::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_matmul() {
        let a = Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(a.matvec(&[1.0, 1.0]), vec![3.0, 7.0]);
        let b = a.matmul(&Matrix::identity(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inverse_roundtrip() {
        let a = Matrix::from_rows(vec![
            vec![4.0, 7.0, 1.0],
            vec![2.0, 6.0, 0.5],
            vec![1.0, 1.0, 3.0],
        ])
        .unwrap();
        let inv = a.inverse(1e-12).unwrap();
        let prod = a.matmul(&inv).unwrap();
        assert!(prod.max_abs_diff(&Matrix::identity(3)) < 1e-12);
    }

    #[test]
    fn singular_reports_min_pivot() {
        let a = Matrix::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        match a.inverse(1e-12) {
            Err(Error::Singular { min_pivot }) => assert!(min_pivot < 1e-12),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn min_singular_of_identity_is_one() {
        let est = Matrix::identity(8).min_singular_estimate(1e-12).unwrap();
        assert!((est - 1.0).abs() < 1e-9, "estimate {est}");
    }

    #[test]
    fn serde_nested_arrays() {
        let a = Matrix::from_rows(vec![vec![1.5, -2.25], vec![0.0, 3.0]]).unwrap();
        let text = serde_json::to_string(&a).unwrap();
        assert_eq!(text, "[[1.5,-2.25],[0.0,3.0]]");
        let back: Matrix = serde_json::from_str(&text).unwrap();
        assert_eq!(a, back);
    }
}
