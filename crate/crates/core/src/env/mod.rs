//! Problem-instance distributions and realized reward tables.
//!
//! A [`Prior`] is a validated [`PriorSpec`]. Drawing from it yields a
//! [`ProblemInstance`] (arm parameters plus the context sequence), and
//! realizing rewards yields the full `K x n` [`RewardTable`], including
//! rewards of arms the policy never pulls.

mod dataset;
mod prior;

pub use dataset::Dataset;
pub use prior::{ContextModel, Prior, PriorFamily, PriorSpec, RewardModel};

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{Error, Result};

/// One draw from the prior together with its realized context sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub arms: usize,
    pub dim: usize,
    pub horizon: usize,
    /// Stacked per-arm parameters, `arms * dim` long (arm-major).
    pub theta: Vec<f64>,
    /// `horizon x dim`, row-major.
    pub contexts: Vec<f64>,
    /// Row labels for dataset-backed instances.
    pub labels: Option<Vec<usize>>,
}

impl ProblemInstance {
    pub fn context(&self, t: usize) -> &[f64] {
        &self.contexts[t * self.dim..(t + 1) * self.dim]
    }

    pub fn arm_params(&self, arm: usize) -> &[f64] {
        &self.theta[arm * self.dim..(arm + 1) * self.dim]
    }

    /// Mean reward `f_i(x_t, theta)`.
    pub fn mean(&self, arm: usize, t: usize) -> f64 {
        match &self.labels {
            Some(labels) => f64::from(u8::from(labels[t] == arm)),
            None => crate::linalg::dot(self.context(t), self.arm_params(arm)),
        }
    }
}

/// All realized rewards of one instance, `arms x horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    pub arms: usize,
    pub horizon: usize,
    values: Vec<f64>,
    means: Vec<f64>,
}

impl RewardTable {
    pub fn from_values(arms: usize, horizon: usize, values: Vec<f64>, means: Vec<f64>) -> Self {
        assert_eq!(values.len(), arms * horizon);
        assert_eq!(means.len(), arms * horizon);
        Self { arms, horizon, values, means }
    }

    #[inline]
    pub fn reward(&self, arm: usize, t: usize) -> f64 {
        self.values[arm * self.horizon + t]
    }

    #[inline]
    pub fn mean(&self, arm: usize, t: usize) -> f64 {
        self.means[arm * self.horizon + t]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Draw `theta*` and the context sequence for a horizon of `horizon` rounds.
pub fn sample_instance<R: Rng + ?Sized>(prior: &Prior, horizon: usize, rng: &mut R) -> Result<ProblemInstance> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    prior.sample(horizon, rng)
}

/// Realize every reward `Y_{i,t}` of `instance` under the prior's reward model.
pub fn realize_rewards<R: Rng + ?Sized>(
    instance: &ProblemInstance,
    prior: &Prior,
    rng: &mut R,
) -> Result<RewardTable> {
    let (k, n) = (instance.arms, instance.horizon);
    if k != prior.arms() || instance.dim != prior.dim() || instance.contexts.len() != n * instance.dim {
        return Err(Error::Internal("instance dimensions do not match the prior".into()));
    }
    let mut means = Vec::with_capacity(k * n);
    for i in 0..k {
        for t in 0..n {
            means.push(instance.mean(i, t));
        }
    }
    let mut values = Vec::with_capacity(k * n);
    match *prior.reward_model() {
        RewardModel::Bernoulli => {
            for &p in &means {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Domain(format!("Bernoulli mean {p} outside [0, 1]")));
                }
                values.push(f64::from(u8::from(rng.random::<f64>() < p)));
            }
        }
        RewardModel::BetaScaled { v } => {
            for &p in &means {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::Domain(format!("beta reward mean {p} outside (0, 1)")));
                }
                let beta = Beta::new(v * p, v * (1.0 - p))
                    .map_err(|e| Error::Domain(format!("beta reward with mean {p}: {e}")))?;
                values.push(beta.sample(rng));
            }
        }
        RewardModel::Gaussian { sigma } => {
            for &m in &means {
                let z: f64 = StandardNormal.sample(rng);
                values.push(if sigma == 0.0 { m } else { m + sigma * z });
            }
        }
        RewardModel::OneHotLabel => {
            if instance.labels.is_none() {
                return Err(Error::Config("one_hot_label rewards need a dataset-backed prior".into()));
            }
            values.extend_from_slice(&means);
        }
    }
    Ok(RewardTable { arms: k, horizon: n, values, means })
}

/// `i_{*,t}` for every round; ties go to the lowest arm index.
pub fn instance_optimal_arms(instance: &ProblemInstance) -> Vec<usize> {
    (0..instance.horizon)
        .map(|t| argmax((0..instance.arms).map(|i| instance.mean(i, t))))
        .collect()
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax<I: IntoIterator<Item = f64>>(values: I) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}
