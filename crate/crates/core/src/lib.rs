//! Sample Average Uncertainty (SAU) exploration for bandit problems.
//!
//! The crate is organised bottom-up:
//!
//! * [`rng`]: seedable random streams and the distribution draws used everywhere else.
//! * [`sau`]: the SAU statistic and the SAU-UCB / SAU-Sampling action rules.
//! * [`linear`] and [`neural`]: value-prediction models (per-arm ridge regression and a small MLP).
//! * [`baselines`]: Beta-Bernoulli TS, UCB1, epsilon-greedy, Bayesian linear TS and uniform play.
//! * [`policy`] and [`models`]: the predict / act / update interface shared by every algorithm.
//! * [`envs`]: multi-armed, synthetic linear and dataset-backed environments.
//! * [`harness`]: the simulation loop, regret accounting, aggregation and the empirical checks.
//! * [`config`]: TOML experiment configuration and the named presets.
//! * [`experiment`]: running a configuration and writing CSV / JSON artifacts.
//!
//! Numerical kernels are generic over [`Scalar`] (`f32` or `f64`); the simulation layer works in
//! `f64` and the aliases at the crate root name the concrete instantiations it uses.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod config;
pub mod envs;
pub mod error;
pub mod experiment;
pub mod harness;
pub mod linalg;
pub mod linear;
pub mod models;
pub mod neural;
pub mod policy;
pub mod rng;
pub mod sau;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use error::{Error, Result};
pub use rng::RngStream;

/// Floating point scalar accepted by the numerical kernels.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; constants in the kernels go through here.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type ArmState64 = sau::ArmState<f64>;
pub type BetaArm64 = baselines::BetaArm<f64>;
pub type BayesLinearArm64 = baselines::BayesLinearArm<f64>;
pub type LinearArmModel64 = linear::LinearArmModel<f64>;
pub type Mlp64 = neural::Mlp<f64>;
pub type AdamState64 = neural::AdamState<f64>;
pub type Gradients64 = neural::Gradients<f64>;
pub type ReplayBuffer64 = neural::ReplayBuffer<f64>;

pub type ArmState32 = sau::ArmState<f32>;
pub type LinearArmModel32 = linear::LinearArmModel<f32>;
pub type Mlp32 = neural::Mlp<f32>;
