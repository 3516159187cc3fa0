//! The SAU statistic and the two SAU exploration rules.
//!
//! For each arm we keep the pull count `n_a` and `S_a^2 = prior + sum of squared prediction
//! residuals`. The statistic `tau_a^2 = S_a^2 / n_a` estimates the reward variance around the
//! value model's predictions, so `tau_a^2 / n_a` is the uncertainty of the arm's sample mean.
//! SAU-UCB adds `sqrt(tau_a^2 log n / n_a)` to the prediction; SAU-Sampling draws the perturbed
//! value from `N(mu_hat, tau_a^2 / n_a)`. During the first `K` steps every arm is played once in
//! turn, so scores are only ever requested for arms with `n_a >= 1`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, RngStream, Scalar};

/// Prediction residual `r - mu_hat`.
pub fn residual<F: Scalar>(reward: F, prediction: F) -> F {
    reward - prediction
}

/// Per-arm SAU accumulators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmState<F> {
    pulls: u64,
    s2: F,
}

impl<F: Scalar> Default for ArmState<F> {
    fn default() -> Self {
        Self::new(F::one())
    }
}

impl<F: Scalar> ArmState<F> {
    /// Fresh arm with `S^2` initialised to `prior_s2` (1 in the canonical algorithm, 0 for the
    /// plain running-average form).
    pub fn new(prior_s2: F) -> Self {
        assert!(prior_s2 >= F::zero(), "prior S^2 must be non-negative");
        Self { pulls: 0, s2: prior_s2 }
    }

    pub fn pulls(&self) -> u64 {
        self.pulls
    }

    pub fn s2(&self) -> F {
        self.s2
    }

    /// `tau^2 = S^2 / n_a`; `None` before the first recorded residual.
    pub fn tau2(&self) -> Option<F> {
        (self.pulls > 0).then(|| self.s2 / F::of(self.pulls as f64))
    }

    fn tau2_or_err(&self) -> Result<F> {
        self.tau2().ok_or(Error::UninitializedArm { arm: usize::MAX })
    }

    /// Record one residual: `n_a += 1`, `S^2 += e^2`.
    pub fn record(&mut self, e: F) {
        self.pulls += 1;
        self.s2 = self.s2 + e * e;
    }

    /// Variance of the arm's sample-mean estimate, `tau^2 / n_a`.
    pub fn sample_mean_variance(&self) -> Option<F> {
        self.tau2().map(|t| t / F::of(self.pulls as f64))
    }
}

/// Functional form of [`ArmState::record`].
pub fn sau_update<F: Scalar>(state: ArmState<F>, e: F) -> ArmState<F> {
    let mut next = state;
    next.record(e);
    next
}

/// How the SAU-UCB bonus uses `tau^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BonusForm {
    /// `sqrt(tau^2 * log n / n_a)`.
    #[default]
    Variance,
    /// `sqrt(tau * log n / n_a)`, the form printed in the pseudo-code listings.
    StdDev,
}

/// SAU-UCB score `mu_hat + sqrt(tau^2 log(n) / n_a)`. `n` is the global step count (>= 1).
pub fn ucb_score<F: Scalar>(mu_hat: F, state: &ArmState<F>, n: F, form: BonusForm) -> Result<F> {
    let tau2 = state.tau2_or_err()?;
    let spread = match form {
        BonusForm::Variance => tau2,
        BonusForm::StdDev => tau2.sqrt(),
    };
    let log_n = n.max(F::one()).ln();
    Ok(mu_hat + (spread * log_n / F::of(state.pulls as f64)).sqrt())
}

/// SAU-Sampling score: a draw from `N(mu_hat, tau^2 / n_a)`.
pub fn sampling_score<F: Scalar>(mu_hat: F, state: &ArmState<F>, rng: &mut RngStream) -> Result<F> {
    let var = state.sample_mean_variance().ok_or(Error::UninitializedArm { arm: usize::MAX })?;
    Ok(F::of(rng.gaussian(mu_hat.as_f64(), var.as_f64())?))
}

/// Perturbed values, one per arm.
#[derive(Debug, Clone, PartialEq)]
pub struct SauScores<F>(pub Vec<F>);

impl<F: Scalar> SauScores<F> {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Index of the largest value; ties go to the lowest index. NaNs never win.
pub fn argmax<F: Scalar>(values: &[F]) -> Result<usize> {
    let mut best: Option<(usize, F)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if !(v > b) => {}
            _ if v.is_nan() => {}
            _ => best = Some((i, v)),
        }
    }
    match best {
        Some((i, _)) => Ok(i),
        None if values.is_empty() => Err(Error::EmptyScores),
        None => Ok(0),
    }
}

/// Action for step `n` (1-based) among `k` arms (0-based): arm `n - 1` while `n <= k`, the
/// argmax of the scores afterwards.
pub fn select_action<F: Scalar>(scores: &SauScores<F>, n: u64, k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::EmptyScores);
    }
    if n >= 1 && n <= k as u64 {
        return Ok((n - 1) as usize);
    }
    if scores.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: scores.len() });
    }
    argmax(&scores.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SauRule {
    Ucb(BonusForm),
    Sampling,
}

/// SAU bookkeeping for a whole action set; the value model lives elsewhere.
#[derive(Debug, Clone)]
pub struct SauExplorer<F> {
    arms: Vec<ArmState<F>>,
    rule: SauRule,
}

impl<F: Scalar> SauExplorer<F> {
    pub fn new(k: usize, rule: SauRule, prior_s2: F) -> Self {
        Self { arms: vec![ArmState::new(prior_s2); k], rule }
    }

    pub fn arms(&self) -> &[ArmState<F>] {
        &self.arms
    }

    pub fn rule(&self) -> SauRule {
        self.rule
    }

    /// Perturbed values for step `n`. Arms without observations keep their raw prediction;
    /// they are only reachable during the forced round-robin.
    pub fn scores(&self, mu_hat: &[F], n: u64, rng: &mut RngStream) -> Result<SauScores<F>> {
        if mu_hat.len() != self.arms.len() {
            return Err(Error::DimensionMismatch { expected: self.arms.len(), got: mu_hat.len() });
        }
        mu_hat
            .iter()
            .zip(&self.arms)
            .enumerate()
            .map(|(arm, (&mu, st))| {
                if st.pulls() == 0 {
                    return Ok(mu);
                }
                match self.rule {
                    SauRule::Ucb(form) => ucb_score(mu, st, F::of(n as f64), form),
                    SauRule::Sampling => sampling_score(mu, st, rng),
                }
                .map_err(|e| match e {
                    Error::UninitializedArm { .. } => Error::UninitializedArm { arm },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(SauScores)
    }

    pub fn act(&self, mu_hat: &[F], n: u64, rng: &mut RngStream) -> Result<usize> {
        let k = self.arms.len();
        if n >= 1 && n <= k as u64 {
            return Ok((n - 1) as usize);
        }
        let scores = self.scores(mu_hat, n, rng)?;
        select_action(&scores, n, k)
    }

    /// Record the residual `reward - prediction` for `arm`.
    pub fn record(&mut self, arm: usize, reward: F, prediction: F) -> Result<()> {
        let k = self.arms.len();
        let st = self.arms.get_mut(arm).ok_or(Error::ArmOutOfRange { arm, arms: k })?;
        st.record(residual(reward, prediction));
        Ok(())
    }
}
