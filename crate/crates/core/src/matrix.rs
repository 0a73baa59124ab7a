//! Small dense matrices for the MIMO filters.
//!
//! Everything here is sized for a handful of application components (n ≤ 8),
//! so the routines are direct O(n³) loops over a row-major `Vec<f64>`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pivot magnitude below which a matrix is treated as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

/// LDLᵀ pivot threshold used by [`Mat::is_positive_definite`].
pub const PD_TOL: f64 = 1e-12;

/// Largest supported dimension.
pub const MAX_DIM: usize = 8;

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mat{}x{}[", self.rows, self.cols)?;
        for r in 0..self.rows {
            if r > 0 {
                write!(f, "; ")?;
            }
            for c in 0..self.cols {
                if c > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self[(r, c)])?;
            }
        }
        write!(f, "]")
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    /// `s·I` of dimension `n`.
    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self::diag(&vec![s; n])
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in entries.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn scalar(v: f64) -> Self {
        Mat {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    /// Builds a matrix from row slices. All rows must have the same length.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
            return Err(Error::usage("ragged or empty row list"));
        }
        Ok(Mat {
            rows: r,
            cols: c,
            data: rows.iter().flat_map(|row| row.iter().copied()).collect(),
        })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::usage(format!(
                "{} entries do not fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    /// Column vector.
    pub fn column(v: &[f64]) -> Self {
        Mat {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|r| (0..self.cols).all(|c| r == c || self[(r, c)] == 0.0))
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    /// `(M + Mᵀ) / 2`.
    pub fn symmetrized(&self) -> Mat {
        debug_assert!(self.is_square());
        let mut s = self.clone();
        for r in 0..self.rows {
            for c in (r + 1)..self.cols {
                let avg = 0.5 * (self[(r, c)] + self[(c, r)]);
                s[(r, c)] = avg;
                s[(c, r)] = avg;
            }
        }
        s
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn mul(&self, rhs: &Mat) -> Result<Mat> {
        if self.cols != rhs.rows {
            return Err(Error::usage(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == 0.0 {
                    continue;
                }
                for c in 0..rhs.cols {
                    out[(r, c)] += a * rhs[(k, c)];
                }
            }
        }
        out.ensure_finite("matrix product")
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.cols != x.len() {
            return Err(Error::usage(format!(
                "cannot multiply {}x{} by a vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| (0..self.cols).map(|c| self[(r, c)] * x[c]).sum())
            .collect())
    }

    pub fn try_add(&self, rhs: &Mat) -> Result<Mat> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn try_sub(&self, rhs: &Mat) -> Result<Mat> {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &Mat, f: impl Fn(f64, f64) -> f64) -> Result<Mat> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::usage(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Gauss–Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Mat> {
        if !self.is_square() {
            return Err(Error::usage(format!(
                "cannot invert a non-square {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Mat::identity(n);
        for col in 0..n {
            let (pivot_row, pivot_mag) = (col..n)
                .map(|r| (r, a[(r, col)].abs()))
                .fold((col, -1.0), |best, cand| if cand.1 > best.1 { cand } else { best });
            if !(pivot_mag > SINGULAR_TOL) {
                return Err(Error::Singular { pivot: pivot_mag });
            }
            if pivot_row != col {
                a.swap_rows(pivot_row, col);
                inv.swap_rows(pivot_row, col);
            }
            let p = a[(col, col)];
            for c in 0..n {
                a[(col, c)] /= p;
                inv[(col, c)] /= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a[(r, col)];
                if factor == 0.0 {
                    continue;
                }
                for c in 0..n {
                    a[(r, c)] -= factor * a[(col, c)];
                    inv[(r, c)] -= factor * inv[(col, c)];
                }
            }
        }
        inv.ensure_finite("matrix inverse")
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        for c in 0..self.cols {
            self.data.swap(i * self.cols + c, j * self.cols + c);
        }
    }

    /// Leading principal minors of the symmetric part, in order.
    pub fn leading_minors(&self) -> Result<Vec<f64>> {
        if !self.is_square() {
            return Err(Error::usage("leading minors need a square matrix"));
        }
        let s = self.symmetrized();
        Ok((1..=self.rows).map(|k| s.leading_block(k).determinant()).collect())
    }

    fn leading_block(&self, k: usize) -> Mat {
        let mut b = Mat::zeros(k, k);
        for r in 0..k {
            for c in 0..k {
                b[(r, c)] = self[(r, c)];
            }
        }
        b
    }

    /// Determinant by elimination with partial pivoting.
    pub fn determinant(&self) -> f64 {
        debug_assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs()))
                .unwrap_or(col);
            let p = a[(pivot_row, col)];
            if p == 0.0 {
                return 0.0;
            }
            if pivot_row != col {
                a.swap_rows(pivot_row, col);
                det = -det;
            }
            det *= p;
            for r in (col + 1)..n {
                let factor = a[(r, col)] / p;
                for c in col..n {
                    a[(r, c)] -= factor * a[(col, c)];
                }
            }
        }
        det
    }

    /// Pivots `d_k` of the LDLᵀ factorization of the symmetric part. Each is
    /// the ratio of consecutive leading principal minors, so all pivots are
    /// positive exactly when all minors are. Stops at the first pivot that is
    /// not above [`PD_TOL`].
    pub fn ldl_pivots(&self) -> Result<Vec<f64>> {
        if !self.is_square() {
            return Err(Error::usage("positive-definiteness needs a square matrix"));
        }
        let n = self.rows;
        let s = self.symmetrized();
        let mut l = Mat::identity(n);
        let mut d = Vec::with_capacity(n);
        for j in 0..n {
            let dj = s[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)] * d[k]).sum::<f64>();
            d.push(dj);
            if !(dj > PD_TOL) {
                break;
            }
            for i in (j + 1)..n {
                let v = s[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)] * d[k]).sum::<f64>();
                l[(i, j)] = v / dj;
            }
        }
        Ok(d)
    }

    /// True iff the symmetric part is positive definite, judged by LDLᵀ
    /// pivots exceeding [`PD_TOL`].
    pub fn is_positive_definite(&self) -> Result<bool> {
        let pivots = self.ldl_pivots()?;
        Ok(pivots.len() == self.rows && pivots.iter().all(|&p| p > PD_TOL))
    }

    /// `xᵀ M x`.
    pub fn weighted_sq_norm(&self, x: &[f64]) -> Result<f64> {
        if !self.is_square() || self.rows != x.len() {
            return Err(Error::usage(format!(
                "weight matrix {}x{} does not match vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        let mx = self.mul_vec(x)?;
        Ok(x.iter().zip(&mx).map(|(a, b)| a * b).sum())
    }

    fn ensure_finite(self, what: &str) -> Result<Mat> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

// Operator forms panic on shape mismatch; the filter code only uses them on
// matrices whose shapes were validated up front.
impl Add for &Mat {
    type Output = Mat;

    fn add(self, rhs: &Mat) -> Mat {
        self.try_add(rhs).expect("shape mismatch in Mat + Mat")
    }
}

impl Sub for &Mat {
    type Output = Mat;

    fn sub(self, rhs: &Mat) -> Mat {
        self.try_sub(rhs).expect("shape mismatch in Mat - Mat")
    }
}
