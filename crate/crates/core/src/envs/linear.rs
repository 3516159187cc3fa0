use serde::{Deserialize, Serialize};

use super::{check_arm, Environment};
use crate::linalg::dot;
use crate::{Error, Result, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum ContextDist {
    GaussianIid,
    /// Components correlated along the vector: `x_i = rho x_{i-1} + sqrt(1 - rho^2) z_i`.
    GaussianAr1 { rho: f64 },
    /// Student-t components clipped to `[-cap, cap]`.
    TruncatedT { df: u32, cap: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaDist {
    /// Entries uniform on [-1, 1], row then scaled to unit norm.
    Uniform,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum ErrorCorr {
    Iid,
    /// Each arm's noise is an AR(1) process in time with stationary sd `noise_sd`.
    Ar1 { rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearEnvSpec {
    pub arms: usize,
    pub dim: usize,
    pub noise_sd: f64,
    pub context: ContextDist,
    pub theta: ThetaDist,
    pub errors: ErrorCorr,
}

impl Default for LinearEnvSpec {
    fn default() -> Self {
        Self {
            arms: 5,
            dim: 5,
            noise_sd: 0.5,
            context: ContextDist::GaussianIid,
            theta: ThetaDist::Uniform,
            errors: ErrorCorr::Iid,
        }
    }
}

impl LinearEnvSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.arms == 0 || self.dim == 0 {
            return bad(format!("arms={} and dim={} must be positive", self.arms, self.dim));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise_sd={} must be finite and non-negative", self.noise_sd));
        }
        match self.context {
            ContextDist::GaussianAr1 { rho } if !(-1.0 < rho && rho < 1.0) => {
                return bad(format!("context rho={rho} must lie in (-1, 1)"))
            }
            ContextDist::TruncatedT { df, cap } if df == 0 || cap.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) => {
                return bad(format!("t contexts need df > 0 and cap > 0, got df={df} cap={cap}"))
            }
            _ => {}
        }
        if let ErrorCorr::Ar1 { rho } = self.errors {
            if !(-1.0 < rho && rho < 1.0) {
                return bad(format!("error rho={rho} must lie in (-1, 1)"));
            }
        }
        Ok(())
    }
}

/// `r = x^T theta_a + eps` with unit-norm `theta_a`.
#[derive(Debug, Clone)]
pub struct LinearEnv {
    spec: LinearEnvSpec,
    theta: Vec<Vec<f64>>,
    noise: Vec<f64>,
    started: bool,
}

pub fn linear_env(spec: LinearEnvSpec, rng: &mut RngStream) -> Result<LinearEnv> {
    spec.validate()?;
    let theta = (0..spec.arms)
        .map(|_| {
            let mut row: Vec<f64> = (0..spec.dim)
                .map(|_| match spec.theta {
                    ThetaDist::Uniform => rng.uniform(-1.0, 1.0),
                    ThetaDist::Gaussian => Ok(rng.standard_normal()),
                })
                .collect::<Result<_>>()?;
            let norm = dot(&row, &row).sqrt();
            if norm == 0.0 {
                return Err(Error::Numerical("drew an all-zero parameter row".into()));
            }
            row.iter_mut().for_each(|v| *v /= norm);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    LinearEnv::with_theta(spec, theta)
}

impl LinearEnv {
    /// Uses the given parameter rows as they are (no normalisation).
    pub fn with_theta(spec: LinearEnvSpec, theta: Vec<Vec<f64>>) -> Result<Self> {
        spec.validate()?;
        if theta.len() != spec.arms {
            return Err(Error::DimensionMismatch { expected: spec.arms, got: theta.len() });
        }
        if let Some(row) = theta.iter().find(|r| r.len() != spec.dim) {
            return Err(Error::DimensionMismatch { expected: spec.dim, got: row.len() });
        }
        Ok(Self { spec, theta, noise: vec![0.0; spec.arms], started: false })
    }

    pub fn spec(&self) -> &LinearEnvSpec {
        &self.spec
    }

    pub fn theta(&self) -> &[Vec<f64>] {
        &self.theta
    }

    fn draw_context(&self, rng: &mut RngStream) -> Result<Vec<f64>> {
        let p = self.spec.dim;
        match self.spec.context {
            ContextDist::GaussianIid => Ok((0..p).map(|_| rng.standard_normal()).collect()),
            ContextDist::GaussianAr1 { rho } => {
                let s = (1.0 - rho * rho).sqrt();
                let mut x = Vec::with_capacity(p);
                let mut prev = rng.standard_normal();
                x.push(prev);
                for _ in 1..p {
                    prev = rho * prev + s * rng.standard_normal();
                    x.push(prev);
                }
                Ok(x)
            }
            ContextDist::TruncatedT { df, cap } => (0..p).map(|_| rng.student_t_truncated(df, cap)).collect(),
        }
    }

    fn advance_noise(&mut self, rng: &mut RngStream) {
        let sd = self.spec.noise_sd;
        match self.spec.errors {
            ErrorCorr::Iid => {}
            ErrorCorr::Ar1 { rho } => {
                let s = if self.started { (1.0 - rho * rho).sqrt() } else { 1.0 };
                let carry = if self.started { rho } else { 0.0 };
                for e in &mut self.noise {
                    *e = carry * *e + s * sd * rng.standard_normal();
                }
                self.started = true;
            }
        }
    }
}

impl Environment for LinearEnv {
    fn num_arms(&self) -> usize {
        self.spec.arms
    }

    fn context_dim(&self) -> usize {
        self.spec.dim
    }

    fn next_context(&mut self, rng: &mut RngStream) -> Result<Vec<f64>> {
        self.draw_context(rng)
    }

    fn reward(&mut self, arm: usize, ctx: &[f64], rng: &mut RngStream) -> Result<f64> {
        let mean = self.expected_reward(arm, ctx)?;
        let eps = match self.spec.errors {
            ErrorCorr::Iid => self.spec.noise_sd * rng.standard_normal(),
            ErrorCorr::Ar1 { .. } => {
                self.advance_noise(rng);
                self.noise[arm]
            }
        };
        Ok(mean + eps)
    }

    fn expected_reward(&self, arm: usize, ctx: &[f64]) -> Result<f64> {
        check_arm(arm, self.spec.arms)?;
        if ctx.len() != self.spec.dim {
            return Err(Error::DimensionMismatch { expected: self.spec.dim, got: ctx.len() });
        }
        Ok(dot(ctx, &self.theta[arm]))
    }
}
