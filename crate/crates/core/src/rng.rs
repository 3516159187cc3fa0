//! Deterministic random streams.
//!
//! Every trial owns a handful of [`RngStream`]s derived from `(master seed, trial, purpose)`.
//! Derivation maps the pair `(trial, purpose)` onto a ChaCha stream id, so distinct pairs
//! (for trial indices below 2^48) address disjoint keystreams of the same key.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal, StudentT};

use crate::{Error, Result};

/// What a derived stream is used for inside a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u16)]
pub enum Purpose {
    /// Environment construction: true parameters, dataset shuffles.
    EnvSetup = 1,
    /// Context generation.
    Context = 2,
    /// Reward noise.
    Reward = 3,
    /// Policy-internal randomness: sampling, epsilon coin flips, mini-batches.
    Policy = 4,
    /// Network weight initialisation.
    ModelInit = 5,
    /// Monte-Carlo checks.
    Check = 6,
    /// Generating synthetic data files shared by all trials.
    Dataset = 7,
}

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    /// Independent stream for `(trial, purpose)` under `master`.
    pub fn derive(master: u64, trial: u64, purpose: Purpose) -> Self {
        debug_assert!(trial < (1 << 48));
        Self::with_stream(master, (trial << 16) | purpose as u64)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidRange { lo, hi });
        }
        Ok(self.inner.random_range(lo..hi))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Gaussian with the given mean and *variance*. Zero variance returns `mean` exactly.
    pub fn gaussian(&mut self, mean: f64, var: f64) -> Result<f64> {
        if !(var >= 0.0) {
            return Err(Error::InvalidParameter(format!("gaussian variance {var} < 0")));
        }
        if var == 0.0 {
            return Ok(mean);
        }
        Ok(mean + var.sqrt() * self.standard_normal())
    }

    /// Gamma(shape, scale).
    pub fn gamma(&mut self, shape: f64, scale: f64) -> Result<f64> {
        let dist = Gamma::new(shape, scale)
            .map_err(|e| Error::InvalidParameter(format!("gamma({shape}, {scale}): {e}")))?;
        Ok(dist.sample(&mut self.inner))
    }

    /// Beta(alpha, beta) through the ratio of two Gamma draws.
    pub fn beta(&mut self, alpha: f64, beta: f64) -> Result<f64> {
        if !(alpha > 0.0) || !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta({alpha}, {beta})")));
        }
        loop {
            let x = self.gamma(alpha, 1.0)?;
            let y = self.gamma(beta, 1.0)?;
            let v = x / (x + y);
            // Tiny shapes can underflow both draws; the open interval is part of the contract.
            if v > 0.0 && v < 1.0 {
                return Ok(v);
            }
        }
    }

    /// Student-t with `df` degrees of freedom, hard-clipped to `[-cap, cap]`.
    pub fn student_t_truncated(&mut self, df: u32, cap: f64) -> Result<f64> {
        if df == 0 || !(cap > 0.0) {
            return Err(Error::InvalidParameter(format!("student_t(df={df}, cap={cap})")));
        }
        let dist = StudentT::new(df as f64)
            .map_err(|e| Error::InvalidParameter(format!("student_t: {e}")))?;
        let v: f64 = dist.sample(&mut self.inner);
        Ok(v.clamp(-cap, cap))
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
