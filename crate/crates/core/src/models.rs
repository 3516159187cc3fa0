//! Value-prediction models that the exploration rules sit on top of.

use crate::linear::LinearArmModel;
use crate::neural::{train_burst, AdamState, Mlp, ReplayBuffer};
use crate::{Error, Result, RngStream};

/// Predicts one value per arm for a context and learns from observed rewards.
pub trait ValueModel: Send {
    fn num_arms(&self) -> usize;

    fn predict(&mut self, ctx: &[f64]) -> Result<Vec<f64>>;

    fn observe(&mut self, ctx: &[f64], arm: usize, reward: f64, rng: &mut RngStream) -> Result<()>;
}

fn check_arm(arm: usize, arms: usize) -> Result<()> {
    if arm >= arms {
        return Err(Error::ArmOutOfRange { arm, arms });
    }
    Ok(())
}

/// Per-arm running average of rewards; predicts 0 for unplayed arms.
#[derive(Debug, Clone)]
pub struct SampleMeanModel {
    sums: Vec<f64>,
    counts: Vec<u64>,
}

impl SampleMeanModel {
    pub fn new(k: usize) -> Self {
        Self { sums: vec![0.0; k], counts: vec![0; k] }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn means(&self) -> Vec<f64> {
        self.sums
            .iter()
            .zip(&self.counts)
            .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect()
    }
}

impl ValueModel for SampleMeanModel {
    fn num_arms(&self) -> usize {
        self.counts.len()
    }

    fn predict(&mut self, _ctx: &[f64]) -> Result<Vec<f64>> {
        Ok(self.means())
    }

    fn observe(&mut self, _ctx: &[f64], arm: usize, reward: f64, _rng: &mut RngStream) -> Result<()> {
        check_arm(arm, self.counts.len())?;
        self.sums[arm] += reward;
        self.counts[arm] += 1;
        Ok(())
    }
}

/// Independent ridge regression per arm.
#[derive(Debug, Clone)]
pub struct LinearModel {
    arms: Vec<LinearArmModel<f64>>,
}

impl LinearModel {
    pub fn new(k: usize, dim: usize, lambda: f64) -> Self {
        Self { arms: vec![LinearArmModel::new(dim, lambda); k] }
    }

    pub fn arms(&self) -> &[LinearArmModel<f64>] {
        &self.arms
    }
}

impl ValueModel for LinearModel {
    fn num_arms(&self) -> usize {
        self.arms.len()
    }

    fn predict(&mut self, ctx: &[f64]) -> Result<Vec<f64>> {
        self.arms.iter().map(|m| m.predict(ctx)).collect()
    }

    fn observe(&mut self, ctx: &[f64], arm: usize, reward: f64, _rng: &mut RngStream) -> Result<()> {
        check_arm(arm, self.arms.len())?;
        self.arms[arm].update(ctx, reward)
    }
}

/// Training cadence for [`NeuralModel`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeuralTraining {
    pub hidden: [usize; 2],
    pub lr: f64,
    /// Train every `train_every` steps...
    pub train_every: u64,
    /// ...for this many mini-batches...
    pub batches: usize,
    /// ...of this size.
    pub batch_size: usize,
}

impl Default for NeuralTraining {
    fn default() -> Self {
        Self { hidden: [100, 100], lr: 0.003, train_every: 20, batches: 10, batch_size: 64 }
    }
}

/// MLP with one output head per arm, trained continuously from a replay buffer.
#[derive(Debug, Clone)]
pub struct NeuralModel {
    net: Mlp<f64>,
    adam: AdamState<f64>,
    buffer: ReplayBuffer<f64>,
    training: NeuralTraining,
    steps: u64,
}

impl NeuralModel {
    pub fn new(k: usize, dim: usize, training: NeuralTraining, init: &mut RngStream) -> Self {
        let net = Mlp::new(&[dim, training.hidden[0], training.hidden[1], k], init);
        let adam = AdamState::with_lr(&net, training.lr);
        Self { net, adam, buffer: ReplayBuffer::new(), training, steps: 0 }
    }

    pub fn net(&self) -> &Mlp<f64> {
        &self.net
    }
}

impl ValueModel for NeuralModel {
    fn num_arms(&self) -> usize {
        self.net.output_dim()
    }

    fn predict(&mut self, ctx: &[f64]) -> Result<Vec<f64>> {
        self.net.forward(ctx)
    }

    fn observe(&mut self, ctx: &[f64], arm: usize, reward: f64, rng: &mut RngStream) -> Result<()> {
        check_arm(arm, self.num_arms())?;
        self.buffer.push(ctx.to_vec(), arm, reward);
        self.steps += 1;
        if self.training.train_every > 0 && self.steps.is_multiple_of(self.training.train_every) {
            let t = &self.training;
            train_burst(&mut self.net, &mut self.adam, &self.buffer, t.batches, t.batch_size, rng)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_mean_tracks_average() {
        let mut m = SampleMeanModel::new(2);
        let mut rng = RngStream::new(0);
        assert_eq!(m.predict(&[]).unwrap(), vec![0.0, 0.0]);
        for r in [1.0, 0.0, 1.0, 1.0] {
            m.observe(&[], 1, r, &mut rng).unwrap();
        }
        assert_eq!(m.predict(&[]).unwrap(), vec![0.0, 0.75]);
        assert!(m.observe(&[], 2, 1.0, &mut rng).is_err());
    }

    #[test]
    fn neural_model_trains_on_cadence() {
        let mut init = RngStream::new(1);
        let training = NeuralTraining { hidden: [8, 8], train_every: 5, batches: 2, batch_size: 4, ..Default::default() };
        let mut m = NeuralModel::new(2, 3, training, &mut init);
        let before = m.net().clone();
        let mut rng = RngStream::new(2);
        for _ in 0..4 {
            m.observe(&[1.0, 0.0, 0.0], 0, 1.0, &mut rng).unwrap();
        }
        assert_eq!(m.net(), &before);
        m.observe(&[1.0, 0.0, 0.0], 0, 1.0, &mut rng).unwrap();
        assert_ne!(m.net(), &before);
    }
}
