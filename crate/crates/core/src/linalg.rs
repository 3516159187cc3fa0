//! Small dense symmetric matrices and Cholesky solves.
//!
//! Sizes here are tiny (context dimensions up to a few hundred), so everything is a flat
//! row-major `Vec` and the factorisation is the textbook column-by-column Cholesky.

use crate::{Error, Result, Scalar};

pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<F> {
    n: usize,
    data: Vec<F>,
}

impl<F: Scalar> SquareMatrix<F> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![F::zero(); n * n] }
    }

    /// `scale * I`.
    pub fn scaled_identity(n: usize, scale: F) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = scale;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: F) {
        self.data[i * self.n + j] = v;
    }

    pub fn diagonal(&self) -> Vec<F> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `self += w * x x^T`.
    pub fn add_outer(&mut self, x: &[F], w: F) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let wi = w * x[i];
            if wi == F::zero() {
                continue;
            }
            let row = &mut self.data[i * self.n..(i + 1) * self.n];
            for (r, &xj) in row.iter_mut().zip(x) {
                *r = *r + wi * xj;
            }
        }
    }

    pub fn mul_vec(&self, x: &[F]) -> Vec<F> {
        self.data.chunks(self.n).map(|row| dot(row, x)).collect()
    }

    /// `x^T M x`.
    pub fn quad_form(&self, x: &[F]) -> F {
        dot(&self.mul_vec(x), x)
    }
}

/// Lower-triangular factor `L` with `A = L L^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky<F> {
    n: usize,
    lower: Vec<F>,
}

impl<F: Scalar> Cholesky<F> {
    pub fn factor(a: &SquareMatrix<F>) -> Result<Self> {
        let n = a.n;
        let mut l = vec![F::zero(); n * n];
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d = d - l[j * n + k] * l[j * n + k];
            }
            // Pivots lost to rounding count as singular.
            let floor = F::epsilon() * F::of(n as f64) * a.get(j, j).abs();
            if !(d > floor) || !d.is_finite() {
                return Err(Error::Numerical(format!("matrix is not positive definite (pivot {j})")));
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Ok(Self { n, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self, i: usize, j: usize) -> F {
        self.lower[i * self.n + j]
    }

    /// Solve `L y = b`.
    pub fn forward(&self, b: &[F]) -> Vec<F> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for (k, &yk) in y[..i].iter().enumerate() {
                s = s - self.lower[i * n + k] * yk;
            }
            y[i] = s / self.lower[i * n + i];
        }
        y
    }

    /// Solve `L^T x = y`.
    pub fn backward(&self, y: &[F]) -> Vec<F> {
        let n = self.n;
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for (k, &xk) in x.iter().enumerate().skip(i + 1) {
                s = s - self.lower[k * n + i] * xk;
            }
            x[i] = s / self.lower[i * n + i];
        }
        x
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[F]) -> Vec<F> {
        self.backward(&self.forward(b))
    }

    /// `b^T A^{-1} b`, computed as `|L^{-1} b|^2`.
    pub fn inv_quad_form(&self, b: &[F]) -> F {
        let y = self.forward(b);
        dot(&y, &y)
    }
}
