//! Small dense linear algebra: row-major matrices, the matrix exponential,
//! exact zero-order-hold discretization and a pivoted linear solver.

use std::ops::{Index, IndexMut, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pivots smaller than this in magnitude mark a matrix as singular.
pub const PIVOT_THRESHOLD: f64 = 1e-12;

/// Dense row-major matrix of `f64`.
///
/// Serialized as an array of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length is wrong.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 {
            return Err(Error::Dimension("matrix must have at least one row and column".into()));
        }
        if let Some(bad) = rows.iter().position(|row| row.len() != c) {
            return Err(Error::Dimension(format!(
                "row {bad} has {} entries, expected {c}",
                rows[bad].len()
            )));
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.concat(),
        })
    }

    /// Column vector from a slice.
    pub fn column(v: &[f64]) -> Self {
        Self::from_row_major(v.len(), 1, v.to_vec())
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

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Matrix-vector product. Panics on dimension mismatch.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension mismatch");
        self.data
            .chunks(self.cols)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Product with the transpose, `selfᵀ v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len(), "matrix-vector dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (row, &vi) in self.data.chunks(self.cols).zip(v) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * vi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matrix product dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.data
            .chunks(self.cols)
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Copies the block starting at (`r0`, `c0`) of the given shape.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        let mut out = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs)
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

/// `e^{M t}` by scaling and squaring with a truncated Taylor series.
pub fn mat_exp(m: &Matrix, t: f64) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "matrix exponential needs a square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    Ok(expm(&m.scale(t)))
}

fn expm(a: &Matrix) -> Matrix {
    let n = a.rows;
    let norm = a.norm_1();
    if norm == 0.0 {
        return Matrix::identity(n);
    }
    // Scale so that the Taylor series converges within a handful of terms.
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(squarings));

    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=40 {
        term = term.matmul(&scaled).scale(1.0 / k as f64);
        sum = sum.add(&term);
        if term.max_abs() <= f64::EPSILON * 0.25 * sum.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum
}

/// Exact zero-order-hold discretization of `ż = F z + G u` over a step `dt`.
///
/// Returns `(A_d, B_d)` with `A_d = e^{F dt}` and `B_d = ∫₀^dt e^{F s} ds G`,
/// both read off the exponential of the augmented block matrix `[[F, G], [0, 0]]`.
pub fn discretize_zoh(f: &Matrix, g: &Matrix, dt: f64) -> Result<(Matrix, Matrix)> {
    let d = f.rows;
    if !f.is_square() || g.rows != d {
        return Err(Error::Dimension(format!(
            "F is {}x{} and G is {}x{}",
            f.rows, f.cols, g.rows, g.cols
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::validation("dt", "step must be positive"));
    }
    let m = g.cols;
    let mut aug = Matrix::zeros(d + m, d + m);
    for i in 0..d {
        for j in 0..d {
            aug[(i, j)] = f[(i, j)] * dt;
        }
        for j in 0..m {
            aug[(i, d + j)] = g[(i, j)] * dt;
        }
    }
    let e = expm(&aug);
    Ok((e.block(0, 0, d, d), e.block(0, d, d, m)))
}

/// Solves `M x = rhs` by Gaussian elimination with partial pivoting.
pub fn solve_linear(m: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = m.rows;
    if !m.is_square() || rhs.len() != n {
        return Err(Error::Dimension(format!(
            "system matrix is {}x{} with right-hand side of length {}",
            m.rows,
            m.cols,
            rhs.len()
        )));
    }
    let mut a = m.clone();
    let mut x = rhs.to_vec();
    for col in 0..n {
        let (piv, pivot) =
            (col..n)
                .map(|r| (r, a[(r, col)].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot <= PIVOT_THRESHOLD {
            return Err(Error::Singular { column: col, pivot });
        }
        if piv != col {
            for j in 0..n {
                a.data.swap(col * n + j, piv * n + j);
            }
            x.swap(col, piv);
        }
        let diag = a[(col, col)];
        for r in col + 1..n {
            let factor = a[(r, col)] / diag;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[(r, j)] -= factor * a[(col, j)];
            }
            x[r] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let s: f64 = (col + 1..n).map(|j| a[(col, j)] * x[j]).sum();
        x[col] = (x[col] - s) / a[(col, col)];
    }
    Ok(x)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
