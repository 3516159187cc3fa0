//! Comparison policies' building blocks: Beta-Bernoulli Thompson sampling, UCB1,
//! epsilon-greedy action selection, conjugate Bayesian linear regression (exact and
//! diagonal-precision sampling) and uniform play.

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, Cholesky, SquareMatrix};
use crate::sau::argmax;
use crate::{Error, Result, RngStream, Scalar};

/// Beta posterior over a Bernoulli arm's mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaArm<F> {
    pub alpha: F,
    pub beta: F,
}

impl<F: Scalar> BetaArm<F> {
    pub fn new(alpha: F, beta: F) -> Result<Self> {
        if !(alpha > F::zero()) || !(beta > F::zero()) {
            return Err(Error::InvalidParameter(format!("beta prior ({alpha}, {beta})")));
        }
        Ok(Self { alpha, beta })
    }

    pub fn mean(&self) -> F {
        self.alpha / (self.alpha + self.beta)
    }

    /// Posterior variance `alpha beta / ((alpha + beta)^2 (alpha + beta + 1))`.
    pub fn variance(&self) -> F {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + F::one()))
    }

    pub fn sample(&self, rng: &mut RngStream) -> F {
        F::of(rng.beta(self.alpha.as_f64(), self.beta.as_f64()).expect("parameters validated"))
    }

    /// `(alpha, beta) += (r, 1 - r)` for `r` in `{0, 1}`.
    pub fn update(&mut self, r: F) -> Result<()> {
        if r == F::one() {
            self.alpha = self.alpha + F::one();
        } else if r == F::zero() {
            self.beta = self.beta + F::one();
        } else {
            return Err(Error::NonBinaryReward(r.as_f64()));
        }
        Ok(())
    }
}

pub fn beta_ts_sample<F: Scalar>(arm: &BetaArm<F>, rng: &mut RngStream) -> F {
    arm.sample(rng)
}

pub fn beta_ts_update<F: Scalar>(arm: BetaArm<F>, r: F) -> Result<BetaArm<F>> {
    let mut next = arm;
    next.update(r)?;
    Ok(next)
}

/// UCB1 score `mu_hat + sqrt(2 log(n) / n_a)`.
pub fn ucb1_score<F: Scalar>(mu_hat: F, pulls: u64, n: F) -> Result<F> {
    if pulls == 0 {
        return Err(Error::UninitializedArm { arm: usize::MAX });
    }
    let two = F::of(2.0);
    Ok(mu_hat + (two * n.max(F::one()).ln() / F::of(pulls as f64)).sqrt())
}

/// Linear annealing from `eps0` to `eps_min` over `decay_steps`, constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub eps0: f64,
    pub eps_min: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    pub fn new(eps0: f64, eps_min: f64, decay_steps: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps0) || !(0.0..=eps0).contains(&eps_min) {
            return Err(Error::InvalidParameter(format!("epsilon schedule {eps0} -> {eps_min}")));
        }
        Ok(Self { eps0, eps_min, decay_steps })
    }

    /// 0.1 decaying to 0.01 over the first `decay_fraction` of the horizon.
    pub fn for_horizon(horizon: u64, decay_fraction: f64) -> Self {
        Self { eps0: 0.1, eps_min: 0.01, decay_steps: (horizon as f64 * decay_fraction).round() as u64 }
    }

    /// Exploration rate at step `n` (1-based).
    pub fn at(&self, n: u64) -> f64 {
        if self.decay_steps == 0 || n >= self.decay_steps {
            return self.eps_min;
        }
        let frac = n.saturating_sub(1) as f64 / self.decay_steps as f64;
        self.eps0 + (self.eps_min - self.eps0) * frac
    }
}

/// Argmax with probability `1 - eps`, a uniformly random arm otherwise.
pub fn epsilon_greedy_act<F: Scalar>(values: &[F], eps: f64, rng: &mut RngStream) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::EmptyScores);
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!("epsilon {eps}")));
    }
    if eps > 0.0 && rng.bernoulli(eps) {
        return Ok(rng.index(values.len()));
    }
    argmax(values)
}

pub fn uniform_act(k: usize, rng: &mut RngStream) -> Result<usize> {
    if k == 0 {
        return Err(Error::EmptyScores);
    }
    Ok(rng.index(k))
}

/// Conjugate normal / inverse-gamma posterior for one arm of a linear bandit:
/// `theta | sigma^2 ~ N(mu, sigma^2 Lambda^{-1})`, `sigma^2 ~ IG(a, b)`.
#[derive(Debug, Clone)]
pub struct BayesLinearArm<F> {
    precision: SquareMatrix<F>,
    moment: Vec<F>,
    sum_r2: F,
    count: u64,
    a0: F,
    b0: F,
    factor: Cholesky<F>,
    mean: Vec<F>,
}

impl<F: Scalar> BayesLinearArm<F> {
    /// Prior `Lambda_0 = lambda I`, zero mean, `IG(a0, b0)` noise.
    pub fn new(dim: usize, lambda: F, a0: F, b0: F) -> Result<Self> {
        if !(lambda > F::zero()) || !(a0 > F::zero()) || !(b0 > F::zero()) {
            return Err(Error::InvalidParameter(format!("bayes linear prior lambda={lambda} a0={a0} b0={b0}")));
        }
        let precision = SquareMatrix::scaled_identity(dim, lambda);
        let factor = Cholesky::factor(&precision)?;
        Ok(Self {
            precision,
            moment: vec![F::zero(); dim],
            sum_r2: F::zero(),
            count: 0,
            a0,
            b0,
            factor,
            mean: vec![F::zero(); dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.moment.len()
    }

    pub fn precision(&self) -> &SquareMatrix<F> {
        &self.precision
    }

    pub fn moment(&self) -> &[F] {
        &self.moment
    }

    pub fn mean(&self) -> &[F] {
        &self.mean
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Noise posterior shape `a0 + n / 2`.
    pub fn shape(&self) -> F {
        self.a0 + F::of(self.count as f64 / 2.0)
    }

    /// Noise posterior rate `b0 + (sum r^2 - mu^T Lambda mu) / 2`.
    pub fn rate(&self) -> F {
        let fit = dot(&self.mean, &self.moment);
        let b = self.b0 + F::of(0.5) * (self.sum_r2 - fit);
        // Rounding can push the data term a hair below zero for noiseless data.
        b.max(self.b0 * F::of(1e-12))
    }

    fn check_dim(&self, x: &[F]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    pub fn update(&mut self, x: &[F], r: F) -> Result<()> {
        self.check_dim(x)?;
        self.precision.add_outer(x, F::one());
        for (m, &xi) in self.moment.iter_mut().zip(x) {
            *m = *m + xi * r;
        }
        self.sum_r2 = self.sum_r2 + r * r;
        self.count += 1;
        self.factor = Cholesky::factor(&self.precision)?;
        self.mean = self.factor.solve(&self.moment);
        Ok(())
    }

    fn sample_noise_variance(&self, rng: &mut RngStream) -> Result<F> {
        let g = rng.gamma(self.shape().as_f64(), 1.0)?;
        Ok(F::of(self.rate().as_f64() / g))
    }

    /// One joint posterior draw of `theta`.
    pub fn sample_theta(&self, rng: &mut RngStream) -> Result<Vec<F>> {
        let sigma = self.sample_noise_variance(rng)?.sqrt();
        let z: Vec<F> = (0..self.dim()).map(|_| F::of(rng.standard_normal())).collect();
        // L^{-T} z has covariance (L L^T)^{-1} = Lambda^{-1}.
        let dev = self.factor.backward(&z);
        Ok(self.mean.iter().zip(dev).map(|(&m, d)| m + sigma * d).collect())
    }

    /// Draw of `theta` with the covariance replaced by `sigma^2 diag(Lambda)^{-1}`.
    pub fn sample_theta_diag(&self, rng: &mut RngStream) -> Result<Vec<F>> {
        let sigma2 = self.sample_noise_variance(rng)?;
        self.precision
            .diagonal()
            .iter()
            .zip(&self.mean)
            .map(|(&d, &m)| {
                if !(d > F::zero()) {
                    return Err(Error::Numerical("zero precision diagonal".into()));
                }
                Ok(m + (sigma2 / d).sqrt() * F::of(rng.standard_normal()))
            })
            .collect()
    }

    /// Predictive variance of `x^T theta` conditional on `sigma^2`, per unit noise variance.
    pub fn unit_predictive_variance(&self, x: &[F]) -> Result<F> {
        self.check_dim(x)?;
        Ok(self.factor.inv_quad_form(x))
    }

    pub fn unit_predictive_variance_diag(&self, x: &[F]) -> Result<F> {
        self.check_dim(x)?;
        Ok(x.iter().zip(self.precision.diagonal()).map(|(&xi, d)| xi * xi / d).sum())
    }
}

pub fn bayes_linear_update<F: Scalar>(arm: BayesLinearArm<F>, x: &[F], r: F) -> Result<BayesLinearArm<F>> {
    let mut next = arm;
    next.update(x, r)?;
    Ok(next)
}

pub fn bayes_linear_ts_sample<F: Scalar>(arm: &BayesLinearArm<F>, x: &[F], rng: &mut RngStream) -> Result<F> {
    arm.check_dim(x)?;
    Ok(dot(x, &arm.sample_theta(rng)?))
}

pub fn precision_diag_ts_sample<F: Scalar>(arm: &BayesLinearArm<F>, x: &[F], rng: &mut RngStream) -> Result<F> {
    arm.check_dim(x)?;
    Ok(dot(x, &arm.sample_theta_diag(rng)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    const DRAWS: usize = 100_000;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn beta_arm_examples() {
        let mut rng = RngStream::new(1);
        let flat = BetaArm::new(1.0, 1.0).unwrap();
        let v = beta_ts_sample(&flat, &mut rng);
        assert!(v > 0.0 && v < 1.0);

        let mut hot = flat;
        for _ in 0..100 {
            hot.update(1.0).unwrap();
        }
        let xs: Vec<f64> = (0..DRAWS).map(|_| hot.sample(&mut rng)).collect();
        assert!((mean_var(&xs).0 - 101.0 / 102.0).abs() < 0.01);

        let a = BetaArm::new(2.0, 3.0).unwrap();
        assert_abs_diff_eq!(a.variance(), 2.0 * 3.0 / (25.0 * 6.0), epsilon = 1e-15);
        assert_abs_diff_eq!(a.variance(), 0.04, epsilon = 1e-15);
        assert!(BetaArm::new(0.0, 1.0).is_err());
    }

    #[test]
    fn beta_update_examples() {
        let b = |a: f64, c: f64| BetaArm::new(a, c).unwrap();
        assert_eq!(beta_ts_update(b(1.0, 1.0), 1.0).unwrap(), b(2.0, 1.0));
        assert_eq!(beta_ts_update(b(1.0, 1.0), 0.0).unwrap(), b(1.0, 2.0));
        assert_eq!(beta_ts_update(b(3.0, 5.0), 1.0).unwrap(), b(4.0, 5.0));
        assert!(matches!(beta_ts_update(b(1.0, 1.0), 0.5), Err(Error::NonBinaryReward(_))));
    }

    #[test]
    fn ucb1_examples() {
        let e = std::f64::consts::E;
        assert_eq!(ucb1_score(0.4, 3, 1.0).unwrap(), 0.4);
        assert_abs_diff_eq!(ucb1_score(0.0, 2, e).unwrap(), 1.0, epsilon = 1e-12);
        let oracle = 0.3 + (2.0 * 4.0 / 8.0f64).sqrt();
        assert_abs_diff_eq!(ucb1_score(0.3, 8, e.powi(4)).unwrap(), oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(oracle, 1.3, epsilon = 1e-12);
        assert!(ucb1_score(0.0, 0, 10.0).is_err());
    }

    #[test]
    fn epsilon_greedy_examples() {
        let mut rng = RngStream::new(2);
        for _ in 0..100 {
            assert_eq!(epsilon_greedy_act(&[0.1, 0.7, 0.3], 0.0, &mut rng).unwrap(), 1);
        }
        let mut counts = [0usize; 4];
        for _ in 0..DRAWS {
            counts[epsilon_greedy_act(&[0.0, 1.0, 2.0, 3.0], 1.0, &mut rng).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / DRAWS as f64 - 0.25).abs() < 0.01);
        }
        let hits = (0..DRAWS).filter(|_| epsilon_greedy_act(&[0.0, 1.0], 0.1, &mut rng).unwrap() == 1).count();
        let oracle = 1.0 - 0.1 + 0.1 / 2.0;
        assert!((hits as f64 / DRAWS as f64 - oracle).abs() < 0.01);
        assert!(epsilon_greedy_act::<f64>(&[], 0.1, &mut rng).is_err());
    }

    #[test]
    fn schedule_is_monotone_and_bounded() {
        let s = EpsilonSchedule::for_horizon(1000, 0.2);
        assert_eq!(s.at(1), 0.1);
        assert_eq!(s.at(200), 0.01);
        assert_eq!(s.at(5000), 0.01);
        let mut prev = 1.0;
        for n in 1..1000 {
            let e = s.at(n);
            assert!((0.01..=0.1).contains(&e) && e <= prev);
            prev = e;
        }
        assert!(EpsilonSchedule::new(1.5, 0.0, 10).is_err());
    }

    #[test]
    fn uniform_act_examples() {
        let mut rng = RngStream::new(4);
        for _ in 0..100 {
            assert_eq!(uniform_act(1, &mut rng).unwrap(), 0);
        }
        let mut counts = [0usize; 7];
        for _ in 0..DRAWS {
            counts[uniform_act(7, &mut rng).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / DRAWS as f64 - 1.0 / 7.0).abs() < 0.01);
        }
        let a: Vec<usize> = {
            let mut r = RngStream::new(9);
            (0..50).map(|_| uniform_act(5, &mut r).unwrap()).collect()
        };
        let b: Vec<usize> = {
            let mut r = RngStream::new(9);
            (0..50).map(|_| uniform_act(5, &mut r).unwrap()).collect()
        };
        assert_eq!(a, b);
        assert!(uniform_act(0, &mut rng).is_err());
    }

    #[test]
    fn bayes_update_examples() {
        let arm = BayesLinearArm::new(3, 0.25, 6.0, 6.0).unwrap();
        let arm = bayes_linear_update(arm, &[1.0, 0.0, 0.0], 1.0).unwrap();
        assert_eq!(arm.precision().get(0, 0), 1.25);
        assert_eq!(arm.precision().get(1, 1), 0.25);

        let before = BayesLinearArm::new(2, 0.25, 6.0, 6.0).unwrap();
        let after = bayes_linear_update(before.clone(), &[0.0, 0.0], 2.0).unwrap();
        assert_eq!(after.precision(), before.precision());
        assert_eq!(after.moment(), before.moment());
        assert_eq!(after.shape(), 6.5);
        assert_eq!(after.rate(), 6.0 + 2.0);
        assert!(bayes_linear_update(after, &[1.0], 0.0).is_err());
    }

    #[test]
    fn posterior_mean_matches_ridge_oracle() {
        let p = 4;
        let theta = [0.5, -0.5, 0.1, 0.7];
        let mut rng = RngStream::new(5);
        let mut arm = BayesLinearArm::new(p, 0.25, 6.0, 6.0).unwrap();
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..500 {
            let x: Vec<f64> = (0..p).map(|_| rng.standard_normal()).collect();
            let r = dot(&x, &theta) + rng.gaussian(0.0, 0.25).unwrap();
            arm.update(&x, r).unwrap();
            rows.extend_from_slice(&x);
            ys.push(r);
        }
        let xm = DMatrix::from_row_slice(500, p, &rows);
        let g = xm.transpose() * &xm + DMatrix::identity(p, p) * 0.25;
        let oracle = g.lu().solve(&(xm.transpose() * DVector::from_vec(ys))).unwrap();
        for i in 0..p {
            assert_abs_diff_eq!(arm.mean()[i], oracle[i], epsilon = 1e-9);
        }
        let err: f64 = arm.mean().iter().zip(&theta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err < 0.1, "posterior mean error {err}");
    }

    #[test]
    fn ts_sample_examples() {
        let mut rng = RngStream::new(6);
        let arm = BayesLinearArm::new(3, 0.25, 6.0, 6.0).unwrap();
        assert_eq!(bayes_linear_ts_sample(&arm, &[0.0; 3], &mut rng).unwrap(), 0.0);
        assert_eq!(precision_diag_ts_sample(&arm, &[0.0; 3], &mut rng).unwrap(), 0.0);

        // Tight posterior from noiseless data.
        let theta = [0.6, -0.8, 0.0];
        let mut tight = arm.clone();
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..3).map(|_| rng.standard_normal()).collect();
            tight.update(&x, dot(&x, &theta)).unwrap();
        }
        let x = [1.0, 1.0, 1.0];
        for _ in 0..200 {
            let v = bayes_linear_ts_sample(&tight, &x, &mut rng).unwrap();
            assert!((v - dot(&x, &theta)).abs() < 0.05, "{v}");
        }
    }

    #[test]
    fn prior_predictive_variance_grows_with_norm() {
        // Prior: x^T theta ~ sigma^2 |x|^2 / lambda with E[sigma^2] = b0 / (a0 - 1).
        let arm = BayesLinearArm::new(2, 0.25, 6.0, 6.0).unwrap();
        let mut rng = RngStream::new(7);
        let oracle = |norm2: f64| 6.0 / 5.0 * norm2 / 0.25;
        for scale in [0.5, 1.0, 2.0] {
            let x = [scale, 0.0];
            let xs: Vec<f64> = (0..DRAWS).map(|_| bayes_linear_ts_sample(&arm, &x, &mut rng).unwrap()).collect();
            let (_, v) = mean_var(&xs);
            let want = oracle(scale * scale);
            assert!((v - want).abs() < 0.05 * want, "scale {scale}: {v} vs {want}");
        }
    }

    #[test]
    fn diagonal_sampler_matches_exact_on_diagonal_precision() {
        let mut arm = BayesLinearArm::new(3, 0.25, 6.0, 6.0).unwrap();
        arm.update(&[2.0, 0.0, 0.0], 1.0).unwrap();
        arm.update(&[0.0, 1.0, 0.0], -1.0).unwrap();
        let x = [0.3, -1.2, 0.8];
        assert_abs_diff_eq!(
            arm.unit_predictive_variance(&x).unwrap(),
            arm.unit_predictive_variance_diag(&x).unwrap(),
            epsilon = 1e-12
        );
        let mut r1 = RngStream::new(8);
        let mut r2 = RngStream::new(8);
        for _ in 0..100 {
            let a = bayes_linear_ts_sample(&arm, &x, &mut r1).unwrap();
            let b = precision_diag_ts_sample(&arm, &x, &mut r2).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn diagonal_sampler_differs_on_correlated_design() {
        let mut arm = BayesLinearArm::new(3, 0.25, 6.0, 6.0).unwrap();
        for x in [[1.0, 0.9, 0.0], [0.9, 1.0, 0.1], [0.0, 0.1, 1.0], [1.0, 1.0, 0.0]] {
            arm.update(&x, 0.5).unwrap();
        }
        let x = [1.0, -1.0, 0.0];
        let p = arm.precision();
        let dense = DMatrix::from_fn(3, 3, |i, j| p.get(i, j));
        let v = DVector::from_row_slice(&x);
        let exact = (v.transpose() * dense.try_inverse().unwrap() * &v)[(0, 0)];
        assert_abs_diff_eq!(arm.unit_predictive_variance(&x).unwrap(), exact, epsilon = 1e-10);
        let diag = arm.unit_predictive_variance_diag(&x).unwrap();
        // Anti-aligned with the correlated pair: the diagonal approximation badly understates it.
        assert!(exact / diag > 5.0, "exact {exact}, diag {diag}");
    }

    proptest! {
        #[test]
        fn bayes_update_is_order_insensitive(
            data in prop::collection::vec((prop::collection::vec(-2.0f64..2.0, 3), -3.0f64..3.0), 1..20),
            seed in any::<u64>(),
        ) {
            let mut shuffled = data.clone();
            let mut rng = RngStream::new(seed);
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.index(i + 1));
            }
            let mut a = BayesLinearArm::new(3, 0.25, 6.0, 6.0).unwrap();
            let mut b = a.clone();
            // Integer-valued inputs keep the sums exact regardless of order.
            for (x, r) in &data {
                let x: Vec<f64> = x.iter().map(|v| (v * 8.0).round() / 8.0).collect();
                a.update(&x, (r * 8.0).round() / 8.0).unwrap();
            }
            for (x, r) in &shuffled {
                let x: Vec<f64> = x.iter().map(|v| (v * 8.0).round() / 8.0).collect();
                b.update(&x, (r * 8.0).round() / 8.0).unwrap();
            }
            prop_assert_eq!(a.precision(), b.precision());
            prop_assert_eq!(a.moment(), b.moment());
        }

        #[test]
        fn beta_mean_after_pulls(rewards in prop::collection::vec(prop::bool::ANY, 0..200)) {
            let mut arm = BetaArm::new(1.0f64, 1.0).unwrap();
            for &r in &rewards {
                arm.update(if r { 1.0 } else { 0.0 }).unwrap();
            }
            let s = rewards.iter().filter(|&&r| r).count() as f64;
            prop_assert_eq!(arm.mean(), (1.0 + s) / (2.0 + rewards.len() as f64));
            prop_assert_eq!(arm.alpha + arm.beta, 2.0 + rewards.len() as f64);
        }
    }
}
