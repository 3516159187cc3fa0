//! Per-arm incremental least squares.
//!
//! The model keeps the sufficient statistics `G = lambda I + sum x x^T` and `b = sum x r` and
//! re-solves `G theta = b` through a fresh Cholesky factor after every observation. With
//! `lambda = 0` the system is singular until the design spans the context space; in that
//! window the cached solution stays at zero and leverage queries fail.

use crate::linalg::{dot, Cholesky, SquareMatrix};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone)]
pub struct LinearArmModel<F> {
    lambda: F,
    gram: SquareMatrix<F>,
    xty: Vec<F>,
    theta: Vec<F>,
    factor: Option<Cholesky<F>>,
    count: u64,
}

/// Leverage `h = x^T G^{-1} x` and, when the noise variance is known, `MSE = h sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeverageReport<F> {
    pub h: F,
    pub mse: Option<F>,
}

impl<F: Scalar> LinearArmModel<F> {
    pub fn new(dim: usize, lambda: F) -> Self {
        assert!(lambda >= F::zero(), "ridge offset must be non-negative");
        let gram = SquareMatrix::scaled_identity(dim, lambda);
        let factor = if lambda > F::zero() { Cholesky::factor(&gram).ok() } else { None };
        Self { lambda, gram, xty: vec![F::zero(); dim], theta: vec![F::zero(); dim], factor, count: 0 }
    }

    pub fn dim(&self) -> usize {
        self.xty.len()
    }

    pub fn lambda(&self) -> F {
        self.lambda
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn gram(&self) -> &SquareMatrix<F> {
        &self.gram
    }

    pub fn xty(&self) -> &[F] {
        &self.xty
    }

    pub fn theta(&self) -> &[F] {
        &self.theta
    }

    /// Whether the normal equations currently have a unique solution.
    pub fn is_solvable(&self) -> bool {
        self.factor.is_some()
    }

    fn check_dim(&self, x: &[F]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// Add the observation `(x, r)` and refresh the solution.
    pub fn update(&mut self, x: &[F], r: F) -> Result<()> {
        self.check_dim(x)?;
        self.gram.add_outer(x, F::one());
        for (b, &xi) in self.xty.iter_mut().zip(x) {
            *b = *b + xi * r;
        }
        self.count += 1;
        self.factor = Cholesky::factor(&self.gram).ok();
        if let Some(f) = &self.factor {
            self.theta = f.solve(&self.xty);
        }
        Ok(())
    }

    /// `x^T theta_hat`.
    pub fn predict(&self, x: &[F]) -> Result<F> {
        self.check_dim(x)?;
        Ok(dot(x, &self.theta))
    }

    /// Leverage of `x` under the current Gram matrix.
    pub fn leverage(&self, x: &[F], sigma2: Option<F>) -> Result<LeverageReport<F>> {
        self.check_dim(x)?;
        let f = self
            .factor
            .as_ref()
            .ok_or_else(|| Error::Numerical("Gram matrix is singular".into()))?;
        let h = f.inv_quad_form(x);
        Ok(LeverageReport { h, mse: sigma2.map(|s| h * s) })
    }

    /// Relative residual `|G theta - b| / |b|` of the cached solution.
    pub fn solve_residual(&self) -> F {
        let g_theta = self.gram.mul_vec(&self.theta);
        let num: F = g_theta.iter().zip(&self.xty).map(|(&a, &b)| (a - b) * (a - b)).sum();
        let den: F = self.xty.iter().map(|&b| b * b).sum();
        if den == F::zero() {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}

/// Functional forms mirroring the method API.
pub fn linear_update<F: Scalar>(mut m: LinearArmModel<F>, x: &[F], r: F) -> Result<LinearArmModel<F>> {
    m.update(x, r)?;
    Ok(m)
}

pub fn linear_predict<F: Scalar>(m: &LinearArmModel<F>, x: &[F]) -> Result<F> {
    m.predict(x)
}

pub fn leverage<F: Scalar>(m: &LinearArmModel<F>, x: &[F]) -> Result<LeverageReport<F>> {
    m.leverage(x, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    use crate::RngStream;

    fn e(i: usize, p: usize) -> Vec<f64> {
        let mut v = vec![0.0; p];
        v[i] = 1.0;
        v
    }

    #[test]
    fn ridge_scalar_example() {
        let m = linear_update(LinearArmModel::new(3, 1.0), &e(0, 3), 2.0).unwrap();
        assert_abs_diff_eq!(m.theta()[0], 1.0, epsilon = 1e-15);
        assert_eq!(&m.theta()[1..], &[0.0, 0.0]);
    }

    #[test]
    fn orthogonal_design_exact() {
        let mut m = LinearArmModel::new(2, 0.0);
        assert!(!m.is_solvable());
        m.update(&e(0, 2), 1.0).unwrap();
        assert!(!m.is_solvable());
        assert_eq!(m.theta(), &[0.0, 0.0]);
        m.update(&e(1, 2), 3.0).unwrap();
        assert_eq!(m.theta(), &[1.0, 3.0]);
    }

    #[test]
    fn recovers_parameters_from_noisy_data() {
        let p = 5;
        let mut rng = RngStream::new(17);
        let theta: Vec<f64> = vec![0.3, -0.6, 0.2, 0.5, -0.4];
        let mut m = LinearArmModel::new(p, 1.0);
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..2000 {
            let x: Vec<f64> = (0..p).map(|_| rng.standard_normal()).collect();
            let r = dot(&x, &theta) + rng.gaussian(0.0, 0.25).unwrap();
            m.update(&x, r).unwrap();
            rows.extend_from_slice(&x);
            ys.push(r);
        }
        // Batch ridge oracle through nalgebra.
        let xm = DMatrix::from_row_slice(2000, p, &rows);
        let y = DVector::from_vec(ys);
        let g = xm.transpose() * &xm + DMatrix::identity(p, p);
        let oracle = g.lu().solve(&(xm.transpose() * y)).unwrap();
        for i in 0..p {
            assert!((m.theta()[i] - oracle[i]).abs() < 1e-9 * (1.0 + oracle[i].abs()));
        }
        let err: f64 = m.theta().iter().zip(&theta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 0.1, "parameter error {err}");
        assert!(m.solve_residual() < 1e-9);
    }

    #[test]
    fn predict_examples() {
        let m = LinearArmModel::<f64>::new(3, 1.0);
        assert_eq!(m.predict(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let mut m = LinearArmModel::new(2, 0.0);
        m.update(&[1.0, 0.0], 1.0).unwrap();
        m.update(&[0.0, 1.0], -1.0).unwrap();
        assert_eq!(m.predict(&[2.0, 3.0]).unwrap(), -1.0);
        assert!(m.predict(&[1.0]).is_err());
        assert!(m.clone().update(&[1.0, 2.0, 3.0], 0.0).is_err());
    }

    #[test]
    fn predict_matches_dense_solve() {
        let p = 4;
        let mut rng = RngStream::new(3);
        let mut m = LinearArmModel::new(p, 0.5);
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..30 {
            let x: Vec<f64> = (0..p).map(|_| rng.standard_normal()).collect();
            let r = rng.standard_normal();
            m.update(&x, r).unwrap();
            rows.extend_from_slice(&x);
            ys.push(r);
        }
        let xm = DMatrix::from_row_slice(30, p, &rows);
        let g = xm.transpose() * &xm + DMatrix::identity(p, p) * 0.5;
        let theta = g.lu().solve(&(xm.transpose() * DVector::from_vec(ys))).unwrap();
        let q: Vec<f64> = (0..p).map(|_| rng.standard_normal()).collect();
        let oracle: f64 = (0..p).map(|i| q[i] * theta[i]).sum();
        let got = m.predict(&q).unwrap();
        assert!((got - oracle).abs() <= 1e-9 * oracle.abs().max(1.0));
    }

    #[test]
    fn leverage_examples() {
        let m = LinearArmModel::<f64>::new(3, 1.0);
        assert_abs_diff_eq!(m.leverage(&e(0, 3), None).unwrap().h, 1.0, epsilon = 1e-15);
        let m = LinearArmModel::<f64>::new(3, 2.0);
        let rep = m.leverage(&e(0, 3), Some(0.25)).unwrap();
        assert_abs_diff_eq!(rep.h, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rep.mse.unwrap(), 0.125, epsilon = 1e-15);
        assert!(LinearArmModel::<f64>::new(3, 0.0).leverage(&e(0, 3), None).is_err());
    }

    #[test]
    fn leverages_sum_to_dimension() {
        let design = [
            [1.0, 0.2, -0.5],
            [0.3, 1.1, 0.4],
            [-0.7, 0.5, 1.3],
            [0.9, -1.2, 0.1],
            [0.2, 0.3, -0.8],
        ];
        let mut m = LinearArmModel::new(3, 0.0);
        for row in &design {
            m.update(row, 0.0).unwrap();
        }
        // Hat-matrix oracle: trace of X (X^T X)^{-1} X^T.
        let xm = DMatrix::from_row_slice(5, 3, design.as_flattened());
        let hat = &xm * (xm.transpose() * &xm).try_inverse().unwrap() * xm.transpose();
        let mut total = 0.0;
        for (j, row) in design.iter().enumerate() {
            let h = m.leverage(row, None).unwrap().h;
            assert!((0.0..=1.0 + 1e-12).contains(&h));
            assert_abs_diff_eq!(h, hat[(j, j)], epsilon = 1e-12);
            total += h;
        }
        assert_abs_diff_eq!(total, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn noiseless_in_sample_residuals_vanish() {
        let p = 3;
        let theta = [0.5, -1.0, 2.0];
        let mut rng = RngStream::new(8);
        let mut m = LinearArmModel::new(p, 0.0);
        let mut xs = Vec::new();
        for _ in 0..6 {
            let x: Vec<f64> = (0..p).map(|_| rng.standard_normal()).collect();
            m.update(&x, dot(&x, &theta)).unwrap();
            xs.push(x);
        }
        for x in &xs {
            assert!((m.predict(x).unwrap() - dot(x, &theta)).abs() < 1e-10);
        }
    }

    #[test]
    fn f32_instantiation() {
        let mut m = LinearArmModel::<f32>::new(2, 1.0);
        m.update(&[1.0, 0.0], 2.0).unwrap();
        assert!((m.theta()[0] - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn cached_solution_solves_normal_equations(
            data in prop::collection::vec((prop::collection::vec(-3.0f64..3.0, 4), -5.0f64..5.0), 1..40),
            lambda in 0.1f64..5.0,
        ) {
            let mut m = LinearArmModel::new(4, lambda);
            for (x, r) in &data {
                m.update(x, *r).unwrap();
            }
            prop_assert!(m.solve_residual() < 1e-9);
        }
    }
}
