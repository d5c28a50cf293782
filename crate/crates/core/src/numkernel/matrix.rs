use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim("Matrix::from_vec", (rows, cols), (data.len(), 1)));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows; all rows must share one length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::dim("Matrix::from_rows", (rows.len(), cols), (1, r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
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

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, other: &Matrix, s: f64) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dim("Matrix::add_scaled", self.shape(), other.shape()));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    /// `self · other`
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dim("matmul", self.shape(), other.shape()));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for n in 0..self.rows {
            let out_row = &mut out.data[n * other.cols..(n + 1) * other.cols];
            for (d, &x) in self.row(n).iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                for (o, &w) in out_row.iter_mut().zip(other.row(d)) {
                    *o += x * w;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other`
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::dim("t_matmul", self.shape(), other.shape()));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for n in 0..self.rows {
            let g = other.row(n);
            for (d, &x) in self.row(n).iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[d * other.cols..(d + 1) * other.cols];
                for (o, &gv) in out_row.iter_mut().zip(g) {
                    *o += x * gv;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::dim("matmul_t", self.shape(), other.shape()));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for n in 0..self.rows {
            let a = self.row(n);
            for h in 0..other.rows {
                out.data[n * other.rows + h] = dot(a, other.row(h));
            }
        }
        Ok(out)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fully connected layer: `x · W + b`.
pub fn affine(x: &Matrix, weight: &Matrix, bias: &[f64]) -> Result<Matrix> {
    if x.cols() != weight.rows() {
        return Err(Error::dim("affine", x.shape(), weight.shape()));
    }
    if bias.len() != weight.cols() {
        return Err(Error::dim("affine bias", weight.shape(), (1, bias.len())));
    }
    let mut out = x.matmul(weight)?;
    for r in 0..out.rows() {
        for (o, b) in out.row_mut(r).iter_mut().zip(bias) {
            *o += b;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct AffineGrads {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub input: Matrix,
}

/// Backward pass of [`affine`] given the upstream gradient `grad_out`.
pub fn affine_backward(x: &Matrix, weight: &Matrix, grad_out: &Matrix) -> Result<AffineGrads> {
    if grad_out.rows() != x.rows() || grad_out.cols() != weight.cols() {
        return Err(Error::dim("affine_backward", grad_out.shape(), (x.rows(), weight.cols())));
    }
    let grad_w = x.t_matmul(grad_out)?;
    let mut grad_b = vec![0.0; weight.cols()];
    for r in 0..grad_out.rows() {
        for (b, g) in grad_b.iter_mut().zip(grad_out.row(r)) {
            *b += g;
        }
    }
    let grad_x = grad_out.matmul_t(weight)?;
    Ok(AffineGrads {
        weight: grad_w,
        bias: grad_b,
        input: grad_x,
    })
}
