//! Tuning of differentiable bandit policies by stochastic gradients of their
//! expected reward under a prior over problem instances.
//!
//! The crate is organized bottom-up:
//!
//! * [`env`] samples problem instances from a prior and realizes reward tables.
//! * [`policy_mab`] and [`policy_ctx`] hold the bandit policies, including the
//!   differentiable families with exact score functions.
//! * [`estimator`] turns simulated episodes into baseline-subtracted reward
//!   gradient estimates and [`optimizer`] runs the gradient-ascent loop.
//! * [`gittins`] computes finite-horizon Gittins indices and [`eval`] estimates
//!   Bayes regret, closed forms, sweeps, and moment-based subspaces.

pub mod env;
pub mod error;
pub mod estimator;
pub mod eval;
pub mod gittins;
pub mod linalg;
pub mod optimizer;
pub mod policy;
pub mod policy_ctx;
pub mod policy_mab;
pub mod rng;

pub use error::{Error, Result};
pub use policy::{BanditPolicy, PolicySpec};
