//! Monte-Carlo checks of the residual-based uncertainty estimates.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::baselines::BetaArm;
use crate::linear::LinearArmModel;
use crate::{Error, Result, RngStream};

/// Outcome of a check: `|lhs - rhs| <= band` passes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub pass: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub diff: f64,
    /// Standard error of `diff`.
    pub sem: f64,
    pub band: f64,
    pub params: BTreeMap<String, f64>,
}

impl CheckReport {
    fn new(check: &str, lhs: f64, rhs: f64, sem: f64, bias_bound: f64, params: &[(&str, f64)]) -> Self {
        Self::with_slack(check, lhs, rhs, sem, bias_bound, 1e-12 * lhs.abs().max(rhs.abs()), params)
    }

    /// `slack` absorbs floating point rounding in cases whose exact answer is zero.
    fn with_slack(
        check: &str,
        lhs: f64,
        rhs: f64,
        sem: f64,
        bias_bound: f64,
        slack: f64,
        params: &[(&str, f64)],
    ) -> Self {
        let diff = lhs - rhs;
        let band = bias_bound + 3.0 * sem;
        Self {
            check: check.to_owned(),
            pass: diff.abs() <= band + slack,
            lhs,
            rhs,
            diff,
            sem,
            band,
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

/// Running mean and standard error.
#[derive(Debug, Default, Clone, Copy)]
struct Moments {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n
    }

    fn sem(&self) -> f64 {
        if self.n < 2.0 {
            return 0.0;
        }
        let var = ((self.sum_sq - self.sum * self.sum / self.n) / (self.n - 1.0)).max(0.0);
        (var / self.n).sqrt()
    }
}

fn check_bernoulli_args(mu: f64, n_a: u64, trials: usize) -> Result<()> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidParameter(format!("mu={mu} must lie in [0, 1]")));
    }
    if n_a < 10 || trials == 0 {
        return Err(Error::InvalidParameter(format!("need n_a >= 10 and trials >= 1, got {n_a} and {trials}")));
    }
    Ok(())
}

/// Squared residual of the `n_a`-th reward against the mean of the previous ones, and the
/// number of successes over all `n_a` pulls, for one simulated arm.
fn last_residual(mu: f64, n_a: u64, rng: &mut RngStream) -> (f64, f64) {
    let mut sum = 0.0;
    for _ in 1..n_a {
        sum += f64::from(u8::from(rng.bernoulli(mu)));
    }
    let prev_mean = sum / (n_a - 1) as f64;
    let r = f64::from(u8::from(rng.bernoulli(mu)));
    let e = r - prev_mean;
    (e * e, sum + r)
}

/// Beta(1,1) posterior variance after `n_a` Bernoulli(`mu`) pulls against `E[e^2 / n_a]`.
pub fn check_prop1(mu: f64, n_a: u64, trials: usize, rng: &mut RngStream) -> Result<CheckReport> {
    check_bernoulli_args(mu, n_a, trials)?;
    let (mut post, mut resid, mut diff) = (Moments::default(), Moments::default(), Moments::default());
    let na = n_a as f64;
    for _ in 0..trials {
        let (e2, successes) = last_residual(mu, n_a, rng);
        let arm = BetaArm::new(1.0 + successes, 1.0 + na - successes)?;
        let v = arm.variance();
        post.push(v);
        resid.push(e2 / na);
        diff.push(v - e2 / na);
    }
    Ok(CheckReport::new(
        "prop1",
        post.mean(),
        resid.mean(),
        diff.sem(),
        10.0 / (na * na),
        &[("mu", mu), ("n_a", na), ("trials", trials as f64)],
    ))
}

/// `E[e^2 / n_a]` against the mean squared error `E[(mean - mu)^2] = mu (1 - mu) / n_a`.
pub fn check_prop2(mu: f64, n_a: u64, trials: usize, rng: &mut RngStream) -> Result<CheckReport> {
    check_bernoulli_args(mu, n_a, trials)?;
    let (mut resid, mut mse, mut diff) = (Moments::default(), Moments::default(), Moments::default());
    let na = n_a as f64;
    for _ in 0..trials {
        let (e2, successes) = last_residual(mu, n_a, rng);
        let err2 = (successes / na - mu).powi(2);
        resid.push(e2 / na);
        mse.push(err2);
        diff.push(e2 / na - err2);
    }
    Ok(CheckReport::new(
        "prop2",
        resid.mean(),
        mse.mean(),
        diff.sem(),
        10.0 / (na * na),
        &[
            ("mu", mu),
            ("n_a", na),
            ("trials", trials as f64),
            ("mse_closed_form", mu * (1.0 - mu) / na),
            ("residual_sem", resid.sem()),
        ],
    ))
}

/// Least-squares residual at the last design row against `(1 - h) sigma^2 / n_a`.
///
/// Each redraw regenerates the noise on the fixed `design`, refits an unpenalised per-arm
/// regression and records the squared residual of the last row.
pub fn check_prop4(design: &[Vec<f64>], sigma2: f64, redraws: usize, rng: &mut RngStream) -> Result<CheckReport> {
    let n_a = design.len();
    let p = design.first().map_or(0, Vec::len);
    if p == 0 || n_a < p || redraws == 0 {
        return Err(Error::InvalidParameter(format!("need n_a >= p >= 1 and redraws >= 1, got n_a={n_a}, p={p}")));
    }
    if sigma2 < 0.0 {
        return Err(Error::InvalidParameter(format!("sigma2={sigma2} must be non-negative")));
    }
    let theta: Vec<f64> = (0..p).map(|_| rng.standard_normal()).collect();
    let mut base = LinearArmModel::<f64>::new(p, 0.0);
    for row in design {
        base.update(row, 0.0)?;
    }
    if !base.is_solvable() {
        return Err(Error::Numerical("design is singular".into()));
    }
    let x_n = &design[n_a - 1];
    let h = base.leverage(x_n, None)?.h;
    let na = n_a as f64;
    let sd = sigma2.sqrt();
    let mut resid = Moments::default();
    let signal_sq = design.iter().map(|row| crate::linalg::dot(row, &theta).powi(2)).fold(0.0, f64::max);
    let rounding = 1e4 * f64::EPSILON.powi(2) * (signal_sq + sigma2) / na;
    for _ in 0..redraws {
        let mut fit = LinearArmModel::<f64>::new(p, 0.0);
        let mut last = 0.0;
        for row in design {
            last = crate::linalg::dot(row, &theta) + sd * rng.standard_normal();
            fit.update(row, last)?;
        }
        let e = last - fit.predict(x_n)?;
        resid.push(e * e / na);
    }
    Ok(CheckReport::with_slack(
        "prop4",
        resid.mean(),
        (1.0 - h) * sigma2 / na,
        resid.sem(),
        0.0,
        rounding,
        &[("n_a", na), ("p", p as f64), ("sigma2", sigma2), ("leverage", h), ("redraws", redraws as f64)],
    ))
}

/// Mean of `tau^2 = sum_j (r_j - mean(r_1..r_j))^2 / n_a` over trials against `mu (1 - mu)`,
/// with the bias band `sigma^2 (1 + log(1 + n_a)) / n_a`.
pub fn check_tau_convergence(mu: f64, n_a: u64, trials: usize, rng: &mut RngStream) -> Result<CheckReport> {
    check_bernoulli_args(mu, n_a, trials)?;
    let sigma2 = mu * (1.0 - mu);
    let na = n_a as f64;
    let mut tau2 = Moments::default();
    for _ in 0..trials {
        let (mut sum, mut s2) = (0.0, 0.0);
        for j in 1..=n_a {
            let r = f64::from(u8::from(rng.bernoulli(mu)));
            sum += r;
            let e = r - sum / j as f64;
            s2 += e * e;
        }
        tau2.push(s2 / na);
    }
    Ok(CheckReport::new(
        "tau-convergence",
        tau2.mean(),
        sigma2,
        tau2.sem(),
        sigma2 * (1.0 + (1.0 + na).ln()) / na,
        &[("mu", mu), ("n_a", na), ("trials", trials as f64)],
    ))
}

/// Least-squares fit of cumulative regret on `ln n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub burn_in: usize,
    pub points: usize,
}

/// Fits `cumulative[n - 1] ~ a + b ln n` over steps `n > burn_in`.
pub fn check_log_regret(cumulative: &[f64], burn_in: usize) -> Result<LogFit> {
    let horizon = cumulative.len();
    if horizon < 10 * burn_in.max(1) {
        return Err(Error::InvalidParameter(format!("horizon {horizon} must be at least 10 x burn-in {burn_in}")));
    }
    let pts: Vec<(f64, f64)> = (burn_in + 1..=horizon).map(|n| ((n as f64).ln(), cumulative[n - 1])).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LogFit { slope, intercept: my - slope * mx, r2, burn_in, points: pts.len() })
}
