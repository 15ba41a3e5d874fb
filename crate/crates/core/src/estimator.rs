//! Baseline-subtracted score-function estimates of the Bayes reward gradient.
//!
//! For one episode the contribution is
//! `sum_t score_t * (sum_{s >= t} Y_{I_s, s} - b_t)`; the estimate is the mean
//! contribution over a batch of independently sampled episodes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{instance_optimal_arms, realize_rewards, sample_instance, Prior, ProblemInstance, RewardTable};
use crate::error::{Error, Result};
use crate::policy::BanditPolicy;
use crate::rng::{stream, EpisodeLanes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    None,
    /// Reward-to-go of the instance-optimal arms.
    Opt,
    /// Reward-to-go of an independent run of the same policy on the same rewards.
    #[default]
    #[serde(rename = "self")]
    SelfRun,
}

/// What one training episode produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub arms: Vec<usize>,
    /// Realized reward of the pulled arm in every round.
    pub rewards: Vec<f64>,
    /// `horizon x num_params`, row-major.
    pub scores: Vec<f64>,
    pub num_params: usize,
}

impl Trajectory {
    /// Play `policy` once and record its scores.
    pub fn record(
        policy: &dyn BanditPolicy,
        instance: &ProblemInstance,
        table: &RewardTable,
        rng: &mut crate::rng::StreamRng,
    ) -> Result<Self> {
        let mut scores = Vec::with_capacity(table.horizon * policy.num_params());
        let arms = policy.run(instance, table, rng, Some(&mut scores));
        let num_params = policy.num_params();
        if arms.len() != table.horizon || scores.len() != table.horizon * num_params {
            return Err(Error::Internal(format!(
                "trajectory has {} arms and {} score entries for horizon {} and {num_params} parameters",
                arms.len(),
                scores.len(),
                table.horizon
            )));
        }
        let rewards = arms.iter().enumerate().map(|(t, &i)| table.reward(i, t)).collect();
        Ok(Self { arms, rewards, scores, num_params })
    }
}

/// `out[t] = sum_{s >= t} values[s]`.
pub fn suffix_sums(values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    let mut acc = 0.0;
    for t in (0..values.len()).rev() {
        acc += values[t];
        out[t] = acc;
    }
    out
}

/// Baseline `b_t` for every round.
pub fn baseline_tail(
    kind: BaselineKind,
    instance: &ProblemInstance,
    table: &RewardTable,
    self_run_arms: Option<&[usize]>,
) -> Result<Vec<f64>> {
    let n = table.horizon;
    Ok(match kind {
        BaselineKind::None => vec![0.0; n],
        BaselineKind::Opt => {
            let best = instance_optimal_arms(instance);
            suffix_sums(&best.iter().enumerate().map(|(t, &i)| table.reward(i, t)).collect::<Vec<_>>())
        }
        BaselineKind::SelfRun => {
            let arms = self_run_arms.ok_or_else(|| Error::Internal("self baseline needs an independent run".into()))?;
            suffix_sums(&arms.iter().enumerate().map(|(t, &i)| table.reward(i, t)).collect::<Vec<_>>())
        }
    })
}

/// `b_t` for a single (0-based) round `t`.
pub fn baseline_value(
    kind: BaselineKind,
    t: usize,
    instance: &ProblemInstance,
    table: &RewardTable,
    self_run_arms: Option<&[usize]>,
) -> Result<f64> {
    Ok(baseline_tail(kind, instance, table, self_run_arms)?[t])
}

/// `sum_t score_t (reward_to_go_t - b_t)`.
pub fn episode_contribution(trajectory: &Trajectory, baseline: &[f64]) -> Vec<f64> {
    let p = trajectory.num_params;
    let to_go = suffix_sums(&trajectory.rewards);
    let mut out = vec![0.0; p];
    for (t, score) in trajectory.scores.chunks_exact(p.max(1)).enumerate() {
        let weight = to_go[t] - baseline[t];
        if weight == 0.0 {
            continue;
        }
        for (o, s) in out.iter_mut().zip(score) {
            *o += s * weight;
        }
    }
    out
}

/// One simulated training episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub contribution: Vec<f64>,
    pub reward: f64,
    pub regret: f64,
}

/// Sample an instance, play it, and compute its gradient contribution.
#[allow(clippy::too_many_arguments)]
pub fn simulate_episode(
    policy: &dyn BanditPolicy,
    prior: &Prior,
    horizon: usize,
    baseline: BaselineKind,
    lanes: EpisodeLanes,
    seed: u64,
    iteration: u64,
    index: u64,
) -> Result<EpisodeOutcome> {
    let instance = sample_instance(prior, horizon, &mut stream(seed, lanes.instance, iteration, index))?;
    let table = realize_rewards(&instance, prior, &mut stream(seed, lanes.rewards, iteration, index))?;
    let trajectory = Trajectory::record(policy, &instance, &table, &mut stream(seed, lanes.policy, iteration, index))?;
    let self_run = match baseline {
        BaselineKind::SelfRun => {
            let mut rng = stream(seed, lanes.self_baseline, iteration, index);
            Some(policy.run(&instance, &table, &mut rng, None))
        }
        _ => None,
    };
    let tail = baseline_tail(baseline, &instance, &table, self_run.as_deref())?;
    let reward: f64 = trajectory.rewards.iter().sum();
    let optimal: f64 = instance_optimal_arms(&instance).iter().enumerate().map(|(t, &i)| table.reward(i, t)).sum();
    Ok(EpisodeOutcome { contribution: episode_contribution(&trajectory, &tail), reward, regret: optimal - reward })
}

/// Batch gradient estimate with spread diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub mean: Vec<f64>,
    /// Standard deviation of the per-episode contribution norms.
    pub spread: f64,
    /// `sqrt(trace(Cov(contribution)))`, the per-episode standard deviation.
    pub contribution_std: f64,
    /// Per-episode contribution norms, in episode order.
    pub norms: Vec<f64>,
    pub batch_size: usize,
    /// Mean realized reward and regret of the batch.
    pub mean_reward: f64,
    pub mean_regret: f64,
}

impl GradientEstimate {
    pub fn norm(&self) -> f64 {
        crate::linalg::frobenius(&self.mean)
    }

    /// Standard error of each coordinate of the mean.
    pub fn stderr(&self, contributions: &[Vec<f64>]) -> Vec<f64> {
        let m = contributions.len() as f64;
        (0..self.mean.len())
            .map(|j| {
                let var = contributions.iter().map(|c| (c[j] - self.mean[j]).powi(2)).sum::<f64>() / (m - 1.0);
                (var / m).sqrt()
            })
            .collect()
    }
}

/// Reduce per-episode outcomes in the given order.
pub fn reduce(outcomes: &[EpisodeOutcome]) -> Result<GradientEstimate> {
    let m = outcomes.len();
    if m == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let p = outcomes[0].contribution.len();
    if outcomes.iter().any(|o| o.contribution.len() != p) {
        return Err(Error::Internal("per-episode gradients have different shapes".into()));
    }
    let mut mean = vec![0.0; p];
    for o in outcomes {
        for (a, c) in mean.iter_mut().zip(&o.contribution) {
            *a += c;
        }
    }
    mean.iter_mut().for_each(|a| *a /= m as f64);
    let norms: Vec<f64> = outcomes.iter().map(|o| crate::linalg::frobenius(&o.contribution)).collect();
    let (spread, contribution_std) = if m > 1 {
        let norm_mean = norms.iter().sum::<f64>() / m as f64;
        let norm_var = norms.iter().map(|v| (v - norm_mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        let total_var = outcomes
            .iter()
            .map(|o| o.contribution.iter().zip(&mean).map(|(c, a)| (c - a).powi(2)).sum::<f64>())
            .sum::<f64>()
            / (m - 1) as f64;
        (norm_var.sqrt(), total_var.sqrt())
    } else {
        (0.0, 0.0)
    };
    Ok(GradientEstimate {
        mean,
        spread,
        contribution_std,
        norms,
        batch_size: m,
        mean_reward: outcomes.iter().map(|o| o.reward).sum::<f64>() / m as f64,
        mean_regret: outcomes.iter().map(|o| o.regret).sum::<f64>() / m as f64,
    })
}

/// Simulate `batch` episodes concurrently and return their outcomes in episode order.
#[allow(clippy::too_many_arguments)]
pub fn simulate_batch(
    policy: &dyn BanditPolicy,
    prior: &Prior,
    horizon: usize,
    baseline: BaselineKind,
    batch: usize,
    lanes: EpisodeLanes,
    seed: u64,
    iteration: u64,
) -> Result<Vec<EpisodeOutcome>> {
    (0..batch as u64)
        .into_par_iter()
        .map(|j| simulate_episode(policy, prior, horizon, baseline, lanes, seed, iteration, j))
        .collect()
}

/// Empirical reward gradient over `batch` fresh episodes.
#[allow(clippy::too_many_arguments)]
pub fn estimate_gradient(
    policy: &dyn BanditPolicy,
    prior: &Prior,
    horizon: usize,
    baseline: BaselineKind,
    batch: usize,
    lanes: EpisodeLanes,
    seed: u64,
    iteration: u64,
) -> Result<GradientEstimate> {
    reduce(&simulate_batch(policy, prior, horizon, baseline, batch, lanes, seed, iteration)?)
}
