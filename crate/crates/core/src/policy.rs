//! The predict / act / update interface every algorithm implements, and the algorithms.
//!
//! Steps are 1-based (`n = 1, 2, ...`), arms are 0-based indices.

use crate::baselines::{epsilon_greedy_act, ucb1_score, uniform_act, BayesLinearArm, BetaArm, EpsilonSchedule};
use crate::linalg::dot;
use crate::models::{SampleMeanModel, ValueModel};
use crate::sau::{argmax, SauExplorer, SauRule};
use crate::{Error, Result, RngStream};

pub trait Policy: Send {
    fn num_arms(&self) -> usize;

    /// Values for every arm in context `ctx` (posterior draws for Thompson sampling).
    fn predict(&mut self, ctx: &[f64], rng: &mut RngStream) -> Result<Vec<f64>>;

    /// Choose an arm at step `n` given the predicted values.
    fn act(&mut self, values: &[f64], n: u64, rng: &mut RngStream) -> Result<usize>;

    fn update(&mut self, ctx: &[f64], arm: usize, reward: f64, rng: &mut RngStream) -> Result<()>;
}

/// SAU-UCB or SAU-Sampling over any value model.
pub struct SauPolicy {
    model: Box<dyn ValueModel>,
    explorer: SauExplorer<f64>,
    last_prediction: Vec<f64>,
}

impl SauPolicy {
    pub fn new(model: Box<dyn ValueModel>, rule: SauRule, prior_s2: f64) -> Self {
        let k = model.num_arms();
        Self { model, explorer: SauExplorer::new(k, rule, prior_s2), last_prediction: vec![0.0; k] }
    }

    pub fn explorer(&self) -> &SauExplorer<f64> {
        &self.explorer
    }
}

impl Policy for SauPolicy {
    fn num_arms(&self) -> usize {
        self.explorer.arms().len()
    }

    fn predict(&mut self, ctx: &[f64], _rng: &mut RngStream) -> Result<Vec<f64>> {
        let values = self.model.predict(ctx)?;
        self.last_prediction.clone_from(&values);
        Ok(values)
    }

    fn act(&mut self, values: &[f64], n: u64, rng: &mut RngStream) -> Result<usize> {
        self.explorer.act(values, n, rng)
    }

    fn update(&mut self, ctx: &[f64], arm: usize, reward: f64, rng: &mut RngStream) -> Result<()> {
        let prediction = *self
            .last_prediction
            .get(arm)
            .ok_or(Error::ArmOutOfRange { arm, arms: self.num_arms() })?;
        self.explorer.record(arm, reward, prediction)?;
        self.model.observe(ctx, arm, reward, rng)
    }
}

/// UCB1 on sample means, with the same forced round-robin start.
pub struct Ucb1Policy {
    means: SampleMeanModel,
}

impl Ucb1Policy {
    pub fn new(k: usize) -> Self {
        Self { means: SampleMeanModel::new(k) }
    }
}

impl Policy for Ucb1Policy {
    fn num_arms(&self) -> usize {
        self.means.num_arms()
    }

    fn predict(&mut self, ctx: &[f64], _rng: &mut RngStream) -> Result<Vec<f64>> {
        self.means.predict(ctx)
    }

    fn act(&mut self, values: &[f64], n: u64, _rng: &mut RngStream) -> Result<usize> {
        let k = self.num_arms();
        if n <= k as u64 {
            return Ok(n.saturating_sub(1) as usize);
        }
        let scores = values
            .iter()
            .zip(self.means.counts())
            .map(|(&mu, &c)| ucb1_score(mu, c, n as f64))
            .collect::<Result<Vec<_>>>()?;
        argmax(&scores)
    }

    fn update(&mut self, ctx: &[f64], arm: usize, reward: f64, rng: &mut RngStream) -> Result<()> {
        self.means.observe(ctx, arm, reward, rng)
    }
}

/// Beta-Bernoulli Thompson sampling.
pub struct BetaTsPolicy {
    arms: Vec<BetaArm<f64>>,
}

impl BetaTsPolicy {
    pub fn new(k: usize, alpha0: f64, beta0: f64) -> Result<Self> {
        Ok(Self { arms: vec![BetaArm::new(alpha0, beta0)?; k] })
    }

    pub fn arms(&self) -> &[BetaArm<f64>] {
        &self.arms
    }
}

impl Policy for BetaTsPolicy {
    fn num_arms(&self) -> usize {
        self.arms.len()
    }

    fn predict(&mut self, _ctx: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
        Ok(self.arms.iter().map(|a| a.sample(rng)).collect())
    }

    fn act(&mut self, values: &[f64], _n: u64, _rng: &mut RngStream) -> Result<usize> {
        argmax(values)
    }

    fn update(&mut self, _ctx: &[f64], arm: usize, reward: f64, _rng: &mut RngStream) -> Result<()> {
        let k = self.arms.len();
        self.arms.get_mut(arm).ok_or(Error::ArmOutOfRange { arm, arms: k })?.update(reward)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosteriorSampler {
    Exact,
    PrecisionDiag,
}

/// Thompson sampling with per-arm conjugate Bayesian linear regression.
pub struct LinearTsPolicy {
    arms: Vec<BayesLinearArm<f64>>,
    sampler: PosteriorSampler,
}

impl LinearTsPolicy {
    pub fn new(k: usize, dim: usize, lambda: f64, a0: f64, b0: f64, sampler: PosteriorSampler) -> Result<Self> {
        Ok(Self { arms: vec![BayesLinearArm::new(dim, lambda, a0, b0)?; k], sampler })
    }
}

impl Policy for LinearTsPolicy {
    fn num_arms(&self) -> usize {
        self.arms.len()
    }

    fn predict(&mut self, ctx: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
        self.arms
            .iter()
            .map(|arm| {
                let theta = match self.sampler {
                    PosteriorSampler::Exact => arm.sample_theta(rng)?,
                    PosteriorSampler::PrecisionDiag => arm.sample_theta_diag(rng)?,
                };
                if theta.len() != ctx.len() {
                    return Err(Error::DimensionMismatch { expected: theta.len(), got: ctx.len() });
                }
                Ok(dot(ctx, &theta))
            })
            .collect()
    }

    fn act(&mut self, values: &[f64], _n: u64, _rng: &mut RngStream) -> Result<usize> {
        argmax(values)
    }

    fn update(&mut self, ctx: &[f64], arm: usize, reward: f64, _rng: &mut RngStream) -> Result<()> {
        let k = self.arms.len();
        self.arms.get_mut(arm).ok_or(Error::ArmOutOfRange { arm, arms: k })?.update(ctx, reward)
    }
}

/// Epsilon-greedy over any value model (LinearGreedy, NeuralGreedy).
pub struct GreedyPolicy {
    model: Box<dyn ValueModel>,
    schedule: EpsilonSchedule,
}

impl GreedyPolicy {
    pub fn new(model: Box<dyn ValueModel>, schedule: EpsilonSchedule) -> Self {
        Self { model, schedule }
    }
}

impl Policy for GreedyPolicy {
    fn num_arms(&self) -> usize {
        self.model.num_arms()
    }

    fn predict(&mut self, ctx: &[f64], _rng: &mut RngStream) -> Result<Vec<f64>> {
        self.model.predict(ctx)
    }

    fn act(&mut self, values: &[f64], n: u64, rng: &mut RngStream) -> Result<usize> {
        epsilon_greedy_act(values, self.schedule.at(n), rng)
    }

    fn update(&mut self, ctx: &[f64], arm: usize, reward: f64, rng: &mut RngStream) -> Result<()> {
        self.model.observe(ctx, arm, reward, rng)
    }
}

pub struct UniformPolicy {
    k: usize,
}

impl UniformPolicy {
    pub fn new(k: usize) -> Self {
        Self { k }
    }
}

impl Policy for UniformPolicy {
    fn num_arms(&self) -> usize {
        self.k
    }

    fn predict(&mut self, _ctx: &[f64], _rng: &mut RngStream) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.k])
    }

    fn act(&mut self, _values: &[f64], _n: u64, rng: &mut RngStream) -> Result<usize> {
        uniform_act(self.k, rng)
    }

    fn update(&mut self, _ctx: &[f64], arm: usize, _reward: f64, _rng: &mut RngStream) -> Result<()> {
        if arm >= self.k {
            return Err(Error::ArmOutOfRange { arm, arms: self.k });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sau::BonusForm;

    #[test]
    fn sau_policy_records_greedy_residual() {
        let mut p = SauPolicy::new(Box::new(SampleMeanModel::new(2)), SauRule::Ucb(BonusForm::Variance), 1.0);
        let mut rng = RngStream::new(0);
        let v = p.predict(&[], &mut rng).unwrap();
        assert_eq!(p.act(&v, 1, &mut rng).unwrap(), 0);
        p.update(&[], 0, 0.5, &mut rng).unwrap();
        let st = p.explorer().arms()[0];
        assert_eq!((st.pulls(), st.s2()), (1, 1.25));
        // Second residual is against the updated sample mean 0.5.
        let v = p.predict(&[], &mut rng).unwrap();
        assert_eq!(v, vec![0.5, 0.0]);
        p.update(&[], 0, 1.0, &mut rng).unwrap();
        assert_eq!(p.explorer().arms()[0].s2(), 1.5);
    }

    #[test]
    fn ucb1_forces_each_arm_first() {
        let mut p = Ucb1Policy::new(3);
        let mut rng = RngStream::new(0);
        for n in 1..=3 {
            let v = p.predict(&[], &mut rng).unwrap();
            let a = p.act(&v, n, &mut rng).unwrap();
            assert_eq!(a as u64, n - 1);
            p.update(&[], a, 1.0, &mut rng).unwrap();
        }
    }

    #[test]
    fn linear_ts_rejects_wrong_context() {
        let mut p = LinearTsPolicy::new(2, 3, 0.25, 6.0, 6.0, PosteriorSampler::Exact).unwrap();
        let mut rng = RngStream::new(0);
        assert!(p.predict(&[1.0], &mut rng).is_err());
        assert_eq!(p.predict(&[1.0, 0.0, 0.0], &mut rng).unwrap().len(), 2);
    }

    #[test]
    fn uniform_checks_arm() {
        let mut p = UniformPolicy::new(2);
        let mut rng = RngStream::new(0);
        assert!(p.update(&[], 2, 0.0, &mut rng).is_err());
    }
}
