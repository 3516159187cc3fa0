//! Bandit environments: multi-armed, synthetic linear and dataset-backed contextual problems.
//!
//! Every environment exposes expected rewards so that regret is measured against the true
//! means rather than the realised noise.

mod dataset;
mod ingest;
mod linear;
mod mab;

pub use dataset::{
    dataset_env, standin_financial, standin_statlog, DatasetEnv, DatasetName, RewardRule, DEFAULT_WARMUP,
};
pub use ingest::{ingest_csv, ingest_reader, ColumnKind, CsvSchema, Dataset, Target};
pub use linear::{linear_env, ContextDist, ErrorCorr, LinearEnv, LinearEnvSpec, ThetaDist};
pub use mab::{bernoulli_env, uniform_threshold_env, MabReward, MultiArmedEnv};

use crate::{Error, Result, RngStream};

pub trait Environment: Send {
    fn num_arms(&self) -> usize;

    /// Length of the context vectors; 0 for multi-armed problems.
    fn context_dim(&self) -> usize;

    /// Number of steps available before the environment is exhausted, if bounded.
    fn horizon(&self) -> Option<usize> {
        None
    }

    fn next_context(&mut self, rng: &mut RngStream) -> Result<Vec<f64>>;

    /// Realised reward for pulling `arm` in the current step. Call at most once per step.
    fn reward(&mut self, arm: usize, ctx: &[f64], rng: &mut RngStream) -> Result<f64>;

    fn expected_reward(&self, arm: usize, ctx: &[f64]) -> Result<f64>;

    fn optimal_value(&self, ctx: &[f64]) -> Result<f64> {
        (0..self.num_arms()).try_fold(f64::NEG_INFINITY, |best, a| Ok(best.max(self.expected_reward(a, ctx)?)))
    }
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn num_arms(&self) -> usize {
        (**self).num_arms()
    }
    fn context_dim(&self) -> usize {
        (**self).context_dim()
    }
    fn horizon(&self) -> Option<usize> {
        (**self).horizon()
    }
    fn next_context(&mut self, rng: &mut RngStream) -> Result<Vec<f64>> {
        (**self).next_context(rng)
    }
    fn reward(&mut self, arm: usize, ctx: &[f64], rng: &mut RngStream) -> Result<f64> {
        (**self).reward(arm, ctx, rng)
    }
    fn expected_reward(&self, arm: usize, ctx: &[f64]) -> Result<f64> {
        (**self).expected_reward(arm, ctx)
    }
    fn optimal_value(&self, ctx: &[f64]) -> Result<f64> {
        (**self).optimal_value(ctx)
    }
}

fn check_arm(arm: usize, arms: usize) -> Result<()> {
    if arm >= arms {
        return Err(Error::ArmOutOfRange { arm, arms });
    }
    Ok(())
}
