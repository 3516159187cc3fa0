//! Running a prepared configuration and writing its artifacts.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::baselines::EpsilonSchedule;
use crate::config::{config_err, EnvConfig, ExperimentConfig, ModelConfig, PolicyConfig, SamplerConfig};
use crate::envs::{bernoulli_env, linear_env, uniform_threshold_env, Dataset, DatasetEnv, Environment};
use crate::harness::{aggregate, run_trials, write_summary_json, write_trace_csv, Agent, Quantiles, Summary, TrialFactory};
use crate::models::{LinearModel, NeuralModel, SampleMeanModel, ValueModel};
use crate::policy::{
    BetaTsPolicy, GreedyPolicy, LinearTsPolicy, Policy, PosteriorSampler, SauPolicy, Ucb1Policy, UniformPolicy,
};
use crate::rng::Purpose;
use crate::sau::SauRule;
use crate::{Result, RngStream};

/// A validated configuration with its data loaded; builds per-trial environments and agents.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    data: Option<Arc<Dataset>>,
}

impl Experiment {
    pub fn new(config: &ExperimentConfig, base_dir: &Path) -> Result<Self> {
        let data = config.load_data(base_dir)?;
        Ok(Self { config: config.clone(), data })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn build_env(&self, master: u64, trial: u64) -> Result<Box<dyn Environment>> {
        let mut rng = RngStream::derive(master, trial, Purpose::EnvSetup);
        Ok(match &self.config.env {
            EnvConfig::Bernoulli { arms, mu_best, eps_gap } => Box::new(bernoulli_env(*arms, *mu_best, *eps_gap)?),
            EnvConfig::UniformThreshold { arms, mu_best, eps_gap } => {
                Box::new(uniform_threshold_env(*arms, *mu_best, *eps_gap)?)
            }
            EnvConfig::Linear(spec) => Box::new(linear_env(*spec, &mut rng)?),
            EnvConfig::Dataset(d) => {
                let data = self.data.clone().ok_or_else(|| config_err("dataset not loaded"))?;
                Box::new(DatasetEnv::new(data, d.name.rule(), Some(self.config.horizon), d.warmup, &mut rng)?)
            }
        })
    }

    pub fn build_agent(&self, policy: &PolicyConfig, k: usize, dim: usize, master: u64, trial: u64) -> Result<Agent> {
        let horizon = self.config.horizon as u64;
        let mut init = RngStream::derive(master, trial, Purpose::ModelInit);
        let mut model = |m: &ModelConfig| -> Box<dyn ValueModel> {
            match m {
                ModelConfig::SampleMean => Box::new(SampleMeanModel::new(k)),
                ModelConfig::Linear { lambda } => Box::new(LinearModel::new(k, dim, *lambda)),
                ModelConfig::Neural(t) => Box::new(NeuralModel::new(k, dim, *t, &mut init)),
            }
        };
        let policy: Box<dyn Policy> = match policy {
            PolicyConfig::SauUcb { model: m, prior_s2, bonus, .. } => {
                Box::new(SauPolicy::new(model(m), SauRule::Ucb(*bonus), *prior_s2))
            }
            PolicyConfig::SauSampling { model: m, prior_s2, .. } => {
                Box::new(SauPolicy::new(model(m), SauRule::Sampling, *prior_s2))
            }
            PolicyConfig::Ucb1 { .. } => Box::new(Ucb1Policy::new(k)),
            PolicyConfig::BetaTs { alpha0, beta0, .. } => Box::new(BetaTsPolicy::new(k, *alpha0, *beta0)?),
            PolicyConfig::LinearTs { lambda, a0, b0, sampler, .. } => {
                let sampler = match sampler {
                    SamplerConfig::Exact => PosteriorSampler::Exact,
                    SamplerConfig::PrecisionDiag => PosteriorSampler::PrecisionDiag,
                };
                Box::new(LinearTsPolicy::new(k, dim, *lambda, *a0, *b0, sampler)?)
            }
            PolicyConfig::Greedy { model: m, epsilon, .. } => {
                let decay = (horizon as f64 * epsilon.decay_fraction).round() as u64;
                let schedule = EpsilonSchedule::new(epsilon.eps0, epsilon.eps_min, decay)?;
                Box::new(GreedyPolicy::new(model(m), schedule))
            }
            PolicyConfig::Uniform { .. } => Box::new(UniformPolicy::new(k)),
            PolicyConfig::Oracle { .. } => return Ok(Agent::Oracle),
        };
        Ok(Agent::Learner(policy))
    }

    /// Trial factory for the policy at `index`.
    pub fn factory(&self, index: usize) -> Result<PolicyRun<'_>> {
        let policy = self
            .config
            .policies
            .get(index)
            .ok_or_else(|| config_err(format!("no policy at index {index}")))?;
        Ok(PolicyRun { experiment: self, policy })
    }
}

pub struct PolicyRun<'a> {
    experiment: &'a Experiment,
    policy: &'a PolicyConfig,
}

impl TrialFactory for PolicyRun<'_> {
    fn build(&self, master: u64, trial: u64) -> Result<(Box<dyn Environment>, Agent)> {
        let env = self.experiment.build_env(master, trial)?;
        let agent = self.experiment.build_agent(self.policy, env.num_arms(), env.context_dim(), master, trial)?;
        Ok((env, agent))
    }
}


/// Aggregated result of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutcome {
    pub label: String,
    pub summary: Summary,
}

impl Experiment {
    /// Runs every trial of the policy at `index` with the configured seed and thread count.
    pub fn run_policy(&self, index: usize) -> Result<PolicyOutcome> {
        let c = &self.config;
        let factory = self.factory(index)?;
        let traces = run_trials(&factory, c.seed, c.trials, c.horizon, c.jobs)?;
        Ok(PolicyOutcome { label: c.policies[index].label(), summary: aggregate(&traces)? })
    }

    pub fn run_all(&self) -> Result<Vec<PolicyOutcome>> {
        (0..self.config.policies.len())
            .map(|i| {
                log::info!("running {} ({} trials x {} steps)", self.config.policies[i].label(), self.config.trials, self.config.horizon);
                self.run_policy(i)
            })
            .collect()
    }
}

#[derive(Debug, Serialize)]
struct SummaryFile<'a> {
    policy: &'a str,
    env: &'a str,
    trials: usize,
    horizon: usize,
    mean_final_regret: f64,
    sem_final_regret: Option<f64>,
    final_quantiles: &'a Quantiles,
    config: &'a ExperimentConfig,
}

/// Writes `<out>/<label>.csv` and `<out>/<label>.json`.
pub fn write_outcome(out_dir: &Path, config: &ExperimentConfig, outcome: &PolicyOutcome) -> Result<()> {
    let env = config.env_label();
    let s = &outcome.summary;
    write_trace_csv(out_dir.join(format!("{}.csv", outcome.label)), s, &outcome.label, &env)?;
    let file = SummaryFile {
        policy: &outcome.label,
        env: &env,
        trials: s.trials,
        horizon: s.horizon,
        mean_final_regret: s.mean_final(),
        sem_final_regret: s.sem_final(),
        final_quantiles: &s.final_quantiles,
        config,
    };
    write_summary_json(out_dir.join(format!("{}.json", outcome.label)), &file)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankRow {
    pub rank: usize,
    pub policy: String,
    pub mean_final_regret: f64,
    pub sem_final_regret: Option<f64>,
}

/// Lowest mean final regret first; ties go to the alphabetically first label.
pub fn ranking(outcomes: &[PolicyOutcome]) -> Vec<RankRow> {
    let mut rows: Vec<_> = outcomes
        .iter()
        .map(|o| (o.summary.mean_final(), o.summary.sem_final(), o.label.clone()))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.2.cmp(&b.2)));
    rows.into_iter()
        .enumerate()
        .map(|(i, (m, s, p))| RankRow { rank: i + 1, policy: p, mean_final_regret: m, sem_final_regret: s })
        .collect()
}

pub fn write_ranking(out_dir: &Path, rows: &[RankRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "policy", "mean_final_regret", "sem_final_regret"])?;
    for r in rows {
        let sem = r.sem_final_regret.map(|s| s.to_string()).unwrap_or_default();
        w.write_record([r.rank.to_string(), r.policy.clone(), r.mean_final_regret.to_string(), sem])?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    crate::harness::write_atomic(out_dir.join("ranking.csv"), &bytes)?;
    write_summary_json(out_dir.join("ranking.json"), &rows)
}
