//! Simulation loop, expected-regret accounting, aggregation over trials and artifact output.

mod checks;
mod output;

pub use checks::{
    check_log_regret, check_prop1, check_prop2, check_prop4, check_tau_convergence, CheckReport, LogFit,
};
pub use output::{read_design_csv, read_trace_csv, write_atomic, write_summary_json, write_trace_csv};

use rayon::prelude::*;
use serde::Serialize;

use crate::envs::Environment;
use crate::policy::Policy;
use crate::rng::Purpose;
use crate::sau::argmax;
use crate::{Error, Result, RngStream};

/// Who picks the arms in a trial.
pub enum Agent {
    Learner(Box<dyn Policy>),
    /// Always plays an arm with the highest expected reward.
    Oracle,
}

impl Agent {
    fn num_arms(&self) -> Option<usize> {
        match self {
            Agent::Learner(p) => Some(p.num_arms()),
            Agent::Oracle => None,
        }
    }
}

/// Builds a fresh environment and agent for `(master_seed, trial)`.
pub trait TrialFactory: Sync {
    fn build(&self, master: u64, trial: u64) -> Result<(Box<dyn Environment>, Agent)>;
}

impl<F> TrialFactory for F
where
    F: Fn(u64, u64) -> Result<(Box<dyn Environment>, Agent)> + Sync,
{
    fn build(&self, master: u64, trial: u64) -> Result<(Box<dyn Environment>, Agent)> {
        self(master, trial)
    }
}

/// Expected regret of playing `arm` in context `ctx`.
pub fn step_regret<E: Environment + ?Sized>(env: &E, ctx: &[f64], arm: usize) -> Result<f64> {
    Ok(env.optimal_value(ctx)? - env.expected_reward(arm, ctx)?)
}

/// Per-step expected regret of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub instant: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl RegretTrace {
    pub fn from_instant(instant: Vec<f64>) -> Self {
        let cumulative = instant
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect();
        Self { instant, cumulative }
    }

    pub fn horizon(&self) -> usize {
        self.instant.len()
    }

    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Runs the observe, predict, act, update loop for `horizon` steps.
///
/// Contexts, rewards and the agent draw from separate streams derived from `(master, trial)`,
/// so two agents facing the same environment see the same contexts.
pub fn run_trial(factory: &dyn TrialFactory, master: u64, trial: u64, horizon: usize) -> Result<RegretTrace> {
    let (mut env, mut agent) = factory.build(master, trial)?;
    let k = env.num_arms();
    if let Some(pk) = agent.num_arms() {
        if pk != k {
            return Err(Error::Config(format!("policy has {pk} arms but the environment has {k}")));
        }
    }
    if horizon < k {
        return Err(Error::Config(format!("horizon {horizon} is shorter than the {k} arms")));
    }
    if let Some(cap) = env.horizon() {
        if horizon > cap {
            return Err(Error::Config(format!("horizon {horizon} exceeds the {cap} steps the environment offers")));
        }
    }

    let mut ctx_rng = RngStream::derive(master, trial, Purpose::Context);
    let mut reward_rng = RngStream::derive(master, trial, Purpose::Reward);
    let mut policy_rng = RngStream::derive(master, trial, Purpose::Policy);
    let mut instant = Vec::with_capacity(horizon);
    for n in 1..=horizon as u64 {
        let x = env.next_context(&mut ctx_rng)?;
        let arm = match &mut agent {
            Agent::Learner(p) => {
                let values = p.predict(&x, &mut policy_rng)?;
                p.act(&values, n, &mut policy_rng)?
            }
            Agent::Oracle => {
                let values = (0..k).map(|a| env.expected_reward(a, &x)).collect::<Result<Vec<_>>>()?;
                argmax(&values)?
            }
        };
        instant.push(step_regret(&env, &x, arm)?);
        let r = env.reward(arm, &x, &mut reward_rng)?;
        if let Agent::Learner(p) = &mut agent {
            p.update(&x, arm, r, &mut policy_rng)?;
        }
    }
    Ok(RegretTrace::from_instant(instant))
}

/// Runs trials `0..trials` on a pool of `jobs` threads; results come back in trial order.
pub fn run_trials(
    factory: &dyn TrialFactory,
    master: u64,
    trials: usize,
    horizon: usize,
    jobs: usize,
) -> Result<Vec<RegretTrace>> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..trials as u64)
            .into_par_iter()
            .map(|t| {
                let trace = run_trial(factory, master, t, horizon);
                log::debug!("trial {t} done");
                trace
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
}

/// Linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Quantiles {
    fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            min: v[0],
            q05: quantile(&v, 0.05),
            q25: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q75: quantile(&v, 0.75),
            q95: quantile(&v, 0.95),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub trials: usize,
    pub horizon: usize,
    pub mean_cumulative: Vec<f64>,
    /// Standard error of the mean curve; absent for a single trial.
    pub sem: Option<Vec<f64>>,
    pub final_regrets: Vec<f64>,
    pub final_quantiles: Quantiles,
}

impl Summary {
    pub fn mean_final(&self) -> f64 {
        self.mean_cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn sem_final(&self) -> Option<f64> {
        self.sem.as_ref().and_then(|s| s.last().copied())
    }
}

/// Pointwise mean and standard error of cumulative regret, summed in trace order.
pub fn aggregate(traces: &[RegretTrace]) -> Result<Summary> {
    let first = traces.first().ok_or_else(|| Error::Config("nothing to aggregate".into()))?;
    let horizon = first.horizon();
    if let Some(t) = traces.iter().find(|t| t.horizon() != horizon) {
        return Err(Error::RaggedHorizons { expected: horizon, got: t.horizon() });
    }
    let n = traces.len() as f64;
    let mean: Vec<f64> = (0..horizon).map(|i| traces.iter().map(|t| t.cumulative[i]).sum::<f64>() / n).collect();
    let sem = (traces.len() > 1).then(|| {
        (0..horizon)
            .map(|i| {
                let ss: f64 = traces.iter().map(|t| (t.cumulative[i] - mean[i]).powi(2)).sum();
                (ss / (n - 1.0)).sqrt() / n.sqrt()
            })
            .collect()
    });
    let finals: Vec<f64> = traces.iter().map(RegretTrace::final_regret).collect();
    Ok(Summary {
        trials: traces.len(),
        horizon,
        mean_cumulative: mean,
        sem,
        final_quantiles: Quantiles::of(&finals),
        final_regrets: finals,
    })
}
