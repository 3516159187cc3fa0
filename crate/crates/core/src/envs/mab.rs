use serde::{Deserialize, Serialize};

use super::{check_arm, Environment};
use crate::{Error, Result, RngStream};

/// How a binary reward with mean `mu` is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MabReward {
    Bernoulli,
    /// `r = 1{u <= mu}` with `u ~ U[0, 1]`.
    UniformThreshold,
}

/// K-armed bandit where arm 0 has mean `mu_best` and every other arm `mu_best - eps_gap`.
#[derive(Debug, Clone)]
pub struct MultiArmedEnv {
    means: Vec<f64>,
    kind: MabReward,
}

impl MultiArmedEnv {
    pub fn new(k: usize, mu_best: f64, eps_gap: f64, kind: MabReward) -> Result<Self> {
        let worst = mu_best - eps_gap;
        if k == 0 {
            return Err(Error::InvalidParameter("need at least one arm".into()));
        }
        if !(0.0..=1.0).contains(&mu_best) || !(0.0..=1.0).contains(&worst) || eps_gap < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "arm means must lie in [0, 1]: mu_best={mu_best}, eps_gap={eps_gap}"
            )));
        }
        let mut means = vec![worst; k];
        means[0] = mu_best;
        Ok(Self { means, kind })
    }

    pub fn from_means(means: Vec<f64>, kind: MabReward) -> Result<Self> {
        if means.is_empty() || means.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(Error::InvalidParameter(format!("arm means must lie in [0, 1]: {means:?}")));
        }
        Ok(Self { means, kind })
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }
}

pub fn bernoulli_env(k: usize, mu_best: f64, eps_gap: f64) -> Result<MultiArmedEnv> {
    MultiArmedEnv::new(k, mu_best, eps_gap, MabReward::Bernoulli)
}

pub fn uniform_threshold_env(k: usize, mu_best: f64, eps_gap: f64) -> Result<MultiArmedEnv> {
    MultiArmedEnv::new(k, mu_best, eps_gap, MabReward::UniformThreshold)
}

impl Environment for MultiArmedEnv {
    fn num_arms(&self) -> usize {
        self.means.len()
    }

    fn context_dim(&self) -> usize {
        0
    }

    fn next_context(&mut self, _rng: &mut RngStream) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }

    fn reward(&mut self, arm: usize, _ctx: &[f64], rng: &mut RngStream) -> Result<f64> {
        check_arm(arm, self.means.len())?;
        let mu = self.means[arm];
        let hit = match self.kind {
            MabReward::Bernoulli => rng.bernoulli(mu),
            MabReward::UniformThreshold => rng.unit() <= mu,
        };
        Ok(if hit { 1.0 } else { 0.0 })
    }

    fn expected_reward(&self, arm: usize, _ctx: &[f64]) -> Result<f64> {
        check_arm(arm, self.means.len())?;
        Ok(self.means[arm])
    }
}
