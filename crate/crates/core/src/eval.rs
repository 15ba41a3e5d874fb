//! Bayes regret estimation, the explore-then-commit closed form, robustness
//! sweeps, and the moment-based subspace estimator.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{
    instance_optimal_arms, realize_rewards, sample_instance, ContextModel, Prior, PriorFamily, PriorSpec, RewardModel,
};
use crate::error::{Error, Result};
use crate::optimizer::{run_gradband, TrainConfig};
use crate::policy::{BanditPolicy, PolicySpec};
use crate::rng::{stream, Purpose, StreamRng};

/// Monte-Carlo estimate of the n-round Bayes regret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub regret_mean: f64,
    pub regret_stderr: f64,
    pub reward_mean: f64,
    pub optimal_reward_mean: f64,
    /// Mean cumulative regret after each round.
    pub curve: Vec<f64>,
    pub num_instances: usize,
    pub horizon: usize,
    pub seed: u64,
}

const CHUNK: usize = 64;

struct ChunkSums {
    curve: Vec<f64>,
    regrets: Vec<f64>,
    rewards: Vec<f64>,
    optimal: Vec<f64>,
}

/// Play `policy` on `num_instances` instances from the evaluation lanes.
pub fn bayes_regret(
    policy: &dyn BanditPolicy,
    prior: &Prior,
    horizon: usize,
    num_instances: usize,
    seed: u64,
) -> Result<EvalReport> {
    if num_instances < 2 {
        return Err(Error::Config("evaluation needs at least 2 instances".into()));
    }
    let chunks: Vec<usize> = (0..num_instances.div_ceil(CHUNK)).collect();
    let sums: Vec<ChunkSums> = chunks
        .par_iter()
        .map(|&c| {
            let mut out = ChunkSums { curve: vec![0.0; horizon], regrets: Vec::new(), rewards: Vec::new(), optimal: Vec::new() };
            for j in (c * CHUNK)..((c + 1) * CHUNK).min(num_instances) {
                let j = j as u64;
                let instance = sample_instance(prior, horizon, &mut stream(seed, Purpose::EvalInstance, 0, j))?;
                let table = realize_rewards(&instance, prior, &mut stream(seed, Purpose::EvalRewards, 0, j))?;
                let arms = policy.run(&instance, &table, &mut stream(seed, Purpose::EvalPolicy, 0, j), None);
                let best = instance_optimal_arms(&instance);
                let (mut cum, mut reward, mut optimal) = (0.0, 0.0, 0.0);
                for t in 0..horizon {
                    let (got, opt) = (table.reward(arms[t], t), table.reward(best[t], t));
                    reward += got;
                    optimal += opt;
                    cum += opt - got;
                    out.curve[t] += cum;
                }
                out.regrets.push(optimal - reward);
                out.rewards.push(reward);
                out.optimal.push(optimal);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let m = num_instances as f64;
    let mut curve = vec![0.0; horizon];
    let (mut regrets, mut rewards, mut optimal) = (Vec::new(), Vec::new(), Vec::new());
    for s in sums {
        curve.iter_mut().zip(&s.curve).for_each(|(a, b)| *a += b);
        regrets.extend(s.regrets);
        rewards.extend(s.rewards);
        optimal.extend(s.optimal);
    }
    curve.iter_mut().for_each(|c| *c /= m);
    let (regret_mean, regret_stderr) = mean_stderr(&regrets);
    if let Some(last) = curve.last_mut() {
        *last = regret_mean;
    }
    Ok(EvalReport {
        regret_mean,
        regret_stderr,
        reward_mean: rewards.iter().sum::<f64>() / m,
        optimal_reward_mean: optimal.iter().sum::<f64>() / m,
        curve,
        num_instances,
        horizon,
        seed,
    })
}

/// Build `spec` and estimate its Bayes regret.
pub fn evaluate_spec(spec: &PolicySpec, prior: &Prior, horizon: usize, num_instances: usize, seed: u64) -> Result<EvalReport> {
    let policy = spec.build(prior, horizon)?;
    bayes_regret(&*policy, prior, horizon, num_instances, seed)
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn etc_reward_integer(mu1: f64, mu2: f64, n: usize, h: usize) -> f64 {
    let gap = mu1 - mu2;
    mu1 * n as f64 - gap * (h as f64 + normal_cdf(-gap * (h as f64 / 2.0).sqrt()) * (n - 2 * h) as f64)
}

/// Expected n-round reward of explore-then-commit with `h` pulls per arm in a
/// two-armed unit-variance Gaussian bandit. Non-integer `h` interpolates
/// linearly between the neighbouring integers, which is the reward of the
/// randomized-rounding policy.
pub fn etc_closed_form_reward(mu1: f64, mu2: f64, n: usize, h: f64) -> Result<f64> {
    let (mu1, mu2) = if mu1 >= mu2 { (mu1, mu2) } else { (mu2, mu1) };
    let upper = (n / 2) as f64;
    if !(h >= 1.0 && h <= upper) {
        return Err(Error::Domain(format!("exploration horizon {h} outside [1, {upper}]")));
    }
    let lo = h.floor();
    let frac = h - lo;
    let r_lo = etc_reward_integer(mu1, mu2, n, lo as usize);
    if frac == 0.0 {
        return Ok(r_lo);
    }
    Ok((1.0 - frac) * r_lo + frac * etc_reward_integer(mu1, mu2, n, lo as usize + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    BatchSize,
    Horizon,
    /// Train on `Beta(alpha, 10 - alpha)` priors and evaluate on every grid value.
    PriorParam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub policy: PolicySpec,
    pub prior: PriorSpec,
    pub horizon: usize,
    pub train: TrainConfig,
    pub eval_instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub train_value: f64,
    pub eval_value: f64,
    pub params: Option<Vec<f64>>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

fn beta_prior(base: &PriorSpec, alpha: f64) -> PriorSpec {
    PriorSpec {
        family: PriorFamily::IndependentBeta { alpha: vec![alpha; base.arms], beta: vec![10.0 - alpha; base.arms] },
        ..base.clone()
    }
}

fn checked_count(v: f64, what: &str) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::Config(format!("{what} grid value {v} is not a positive integer")))
    }
}

/// Train and evaluate along one axis of the configuration.
pub fn sweep(spec: &SweepSpec) -> Result<SweepTable> {
    if spec.grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let seed = spec.train.seed;
    let mut rows = Vec::new();
    for &value in &spec.grid {
        let (prior_spec, horizon, mut train) = match spec.axis {
            SweepAxis::BatchSize => (spec.prior.clone(), spec.horizon, spec.train.clone()),
            SweepAxis::Horizon => (spec.prior.clone(), checked_count(value, "horizon")?, spec.train.clone()),
            SweepAxis::PriorParam => {
                if !(value > 0.0 && value < 10.0) {
                    return Err(Error::Config(format!("prior parameter {value} outside (0, 10)")));
                }
                (beta_prior(&spec.prior, value), spec.horizon, spec.train.clone())
            }
        };
        if spec.axis == SweepAxis::BatchSize {
            train.batch_size = checked_count(value, "batch size")?;
        }
        let prior = prior_spec.build()?;
        let outcome = run_gradband(&spec.policy, &prior, horizon, &train)?;
        let params = outcome.policy.params(prior.dim());
        let policy = outcome.policy.build(&prior, horizon)?;
        match spec.axis {
            SweepAxis::PriorParam => {
                for &eval_value in &spec.grid {
                    let eval_prior = beta_prior(&spec.prior, eval_value).build()?;
                    let report = bayes_regret(&*policy, &eval_prior, horizon, spec.eval_instances, seed)?;
                    rows.push(SweepRow { train_value: value, eval_value, params: params.clone(), report });
                }
            }
            _ => {
                let report = bayes_regret(&*policy, &prior, horizon, spec.eval_instances, seed)?;
                rows.push(SweepRow { train_value: value, eval_value: value, params, report });
            }
        }
    }
    Ok(SweepTable { axis: spec.axis, grid: spec.grid.clone(), rows })
}

impl SweepTable {
    /// Regret matrix with one row per training value and one column per
    /// evaluation value (a single column for non-prior axes).
    pub fn write_matrix_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        let columns: Vec<f64> = if self.axis == SweepAxis::PriorParam { self.grid.clone() } else { vec![] };
        let mut header = vec!["train_value".to_string()];
        if columns.is_empty() {
            header.push("regret_mean".into());
        } else {
            header.extend(columns.iter().map(|c| format!("eval_{c}")));
        }
        w.write_record(&header)?;
        for &train in &self.grid {
            let mut rec = vec![train.to_string()];
            rec.extend(self.rows.iter().filter(|r| r.train_value == train).map(|r| r.report.regret_mean.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// CSV writer with `,` delimiters and LF line endings.
pub fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

/// One line per report: `policy, prior, n, instances, regret_mean, regret_stderr`.
pub fn write_reports_csv(path: &Path, rows: &[(String, String, &EvalReport)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["policy", "prior", "n", "instances", "regret_mean", "regret_stderr"])?;
    for (policy, prior, r) in rows {
        w.write_record([
            policy.clone(),
            prior.clone(),
            r.horizon.to_string(),
            r.num_instances.to_string(),
            r.regret_mean.to_string(),
            r.regret_stderr.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| Error::Internal(e.to_string()))?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Rank-`rank` projector onto the top eigenvectors of `sum_t Y_t^2 x_t x_t^T`
/// over `num_samples` draws of `(x, theta, Y)` from a Gaussian linear prior.
/// Contexts are centered by their known mean first. Returns the projector
/// and its achieved rank, which is lower than `rank` when the moment matrix
/// is rank deficient.
pub fn mom_subspace(num_samples: usize, prior: &Prior, sigma: f64, rank: usize, rng: &mut StreamRng) -> Result<(Vec<f64>, usize)> {
    let d = prior.dim();
    if !(1..=d).contains(&rank) {
        return Err(Error::Config(format!("subspace rank {rank} outside [1, {d}]")));
    }
    if num_samples < d {
        return Err(Error::Config(format!("need at least {d} samples, got {num_samples}")));
    }
    if !matches!(prior.spec().family, PriorFamily::GaussianLinear { .. }) {
        return Err(Error::Config("moment subspace estimation needs a gaussian_linear prior".into()));
    }
    let center = match &prior.spec().context {
        ContextModel::Gaussian { mean, .. } => mean.clone(),
        _ => return Err(Error::Config("moment subspace estimation needs gaussian contexts".into())),
    };
    if !matches!(prior.reward_model(), RewardModel::Gaussian { .. }) {
        log::warn!("moment subspace estimation assumes Gaussian rewards; using noise scale {sigma}");
    }
    let mut moment = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for _ in 0..num_samples {
        let instance = sample_instance(prior, 1, rng)?;
        let x = instance.context(0);
        let noise: f64 = StandardNormal.sample(rng);
        let y = crate::linalg::dot(x, instance.arm_params(0)) + sigma * noise;
        for ((c, xi), m) in centered.iter_mut().zip(x).zip(&center) {
            *c = xi - m;
        }
        crate::linalg::add_outer(&mut moment, y * y, &centered, &centered);
    }
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, &moment));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let tol = top * d as f64 * f64::EPSILON * 16.0;
    let available = order.iter().filter(|&&i| eig.eigenvalues[i] > tol).count();
    let used = rank.min(available);
    if used < rank {
        log::warn!("moment matrix has rank {available}; returning a rank-{used} projector");
    }
    let mut w = vec![0.0; d * d];
    for &k in &order[..used] {
        let v: Vec<f64> = (0..d).map(|i| eig.eigenvectors[(i, k)]).collect();
        crate::linalg::add_outer(&mut w, 1.0, &v, &v);
    }
    Ok((w, used))
}
