use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, ProblemInstance};
use crate::error::{Error, Result};

/// Declarative description of the instance distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub arms: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub family: PriorFamily,
    pub reward: RewardModel,
    #[serde(default)]
    pub context: ContextModel,
}

fn default_dim() -> usize {
    1
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorFamily {
    /// Finite mixture of point masses; each point is `arms * dim` long.
    MixturePoints { points: Vec<Vec<f64>>, weights: Vec<f64> },
    /// `theta_i ~ Beta(alpha_i, beta_i)` independently per arm (`dim` = 1).
    IndependentBeta { alpha: Vec<f64>, beta: Vec<f64> },
    /// Gaussian arm parameters. A `dim`-long mean is shared i.i.d. by every
    /// arm; an `arms * dim`-long mean describes the stacked vector jointly.
    GaussianLinear { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    /// Rows of a labeled CSV file; arms are labels.
    DatasetBacked {
        path: PathBuf,
        #[serde(default)]
        bias: bool,
        #[serde(default = "default_true")]
        standardize: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardModel {
    Bernoulli,
    /// `Beta(v * mean, v * (1 - mean))`.
    BetaScaled { v: f64 },
    Gaussian { sigma: f64 },
    OneHotLabel,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContextModel {
    /// A constant context `x_t = 1` (non-contextual bandits).
    #[default]
    None,
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    DatasetRows,
}

/// Multivariate normal sampler `mean + factor * z`.
#[derive(Debug, Clone)]
struct Gaussian {
    mean: Vec<f64>,
    // row-major, dim x dim
    factor: Vec<f64>,
}

impl Gaussian {
    fn new(mean: &[f64], cov: &[Vec<f64>], what: &str) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d || cov.iter().any(|r| r.len() != d) {
            return Err(Error::Config(format!("{what}: covariance must be {d}x{d}")));
        }
        if mean.iter().chain(cov.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("{what}: non-finite mean or covariance")));
        }
        let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
        let scale = m.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if (&m - m.transpose()).iter().any(|v| v.abs() > 1e-9 * scale) {
            return Err(Error::Config(format!("{what}: covariance is not symmetric")));
        }
        let eig = SymmetricEigen::new(m);
        if eig.eigenvalues.iter().any(|&l| l < -1e-9 * scale) {
            return Err(Error::Config(format!("{what}: covariance is not positive semi-definite")));
        }
        let mut factor = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                factor[i * d + j] = eig.eigenvectors[(i, j)] * eig.eigenvalues[j].max(0.0).sqrt();
            }
        }
        Ok(Self { mean: mean.to_vec(), factor })
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        let d = self.mean.len();
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        for i in 0..d {
            out.push(self.mean[i] + crate::linalg::dot(&self.factor[i * d..(i + 1) * d], &z));
        }
    }
}

#[derive(Debug, Clone)]
enum ThetaSampler {
    Mixture { points: Vec<Vec<f64>>, cumulative: Vec<f64> },
    Beta(Vec<Beta<f64>>),
    GaussianIid(Gaussian),
    GaussianJoint(Gaussian),
    Dataset(Arc<Dataset>),
}

/// A validated prior, ready to sample from.
#[derive(Debug, Clone)]
pub struct Prior {
    spec: PriorSpec,
    theta: ThetaSampler,
    context: Option<Gaussian>,
}

impl PriorSpec {
    /// Validate and precompute sampling factors. Dataset-backed priors load
    /// their CSV file here.
    pub fn build(&self) -> Result<Prior> {
        let dataset = match &self.family {
            PriorFamily::DatasetBacked { path, bias, standardize } => {
                Some(Arc::new(Dataset::load_csv(path, *bias, *standardize)?))
            }
            _ => None,
        };
        Prior::new(self.clone(), dataset)
    }

    /// The two-point Bernoulli mixture `{(0.6, 0.4), (0.4, 0.6)}` with equal weights.
    pub fn mixture2() -> Self {
        Self::bernoulli_points(vec![vec![0.6, 0.4], vec![0.4, 0.6]], vec![0.5, 0.5])
    }

    pub fn bernoulli_points(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Self {
        Self {
            arms: points.first().map_or(0, Vec::len),
            dim: 1,
            family: PriorFamily::MixturePoints { points, weights },
            reward: RewardModel::Bernoulli,
            context: ContextModel::None,
        }
    }

    /// `Beta(alpha, beta)^K` prior with Bernoulli rewards.
    pub fn beta_bernoulli(arms: usize, alpha: f64, beta: f64) -> Self {
        Self {
            arms,
            dim: 1,
            family: PriorFamily::IndependentBeta { alpha: vec![alpha; arms], beta: vec![beta; arms] },
            reward: RewardModel::Bernoulli,
            context: ContextModel::None,
        }
    }

    /// Synthetic contextual problems 1-4: `K = 4`, `d = 8`, `x ~ N(1, I)`,
    /// `theta_i ~ N(0, Sigma_theta)`, Gaussian noise with `sigma = 0.5`.
    pub fn problem(which: u8) -> Self {
        let d = 8;
        let mut cov = vec![vec![0.0; d]; d];
        match which {
            1 => (0..4).for_each(|i| cov[i][i] = 1.0),
            2 => [0, 2].into_iter().for_each(|i| cov[i][i] = 1.0),
            3 => {
                for block in [[0, 1], [2, 3]] {
                    for &i in &block {
                        for &j in &block {
                            cov[i][j] = if i == j { 1.0 } else { 0.95 };
                        }
                    }
                }
            }
            4 => {
                for i in 0..4 {
                    for j in 0..4 {
                        cov[i][j] = if i == j { 1.0 } else { 0.95 };
                    }
                }
            }
            _ => panic!("problems are numbered 1 to 4"),
        }
        let identity: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        Self {
            arms: 4,
            dim: d,
            family: PriorFamily::GaussianLinear { mean: vec![0.0; d], cov },
            reward: RewardModel::Gaussian { sigma: 0.5 },
            context: ContextModel::Gaussian { mean: vec![1.0; d], cov: identity },
        }
    }
}

impl Prior {
    /// Build from a spec and, for dataset-backed families, an already loaded dataset.
    pub fn new(spec: PriorSpec, dataset: Option<Arc<Dataset>>) -> Result<Self> {
        let (k, d) = (spec.arms, spec.dim);
        if k == 0 || d == 0 {
            return Err(Error::Config("arms and dim must be at least 1".into()));
        }
        match spec.reward {
            RewardModel::BetaScaled { v } if !(v > 0.0 && v.is_finite()) => {
                return Err(Error::Config(format!("beta reward scale v = {v} must be positive")));
            }
            RewardModel::Gaussian { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                return Err(Error::Config(format!("reward noise sigma = {sigma} must be nonnegative")));
            }
            _ => {}
        }
        let theta = match &spec.family {
            PriorFamily::MixturePoints { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(Error::Config("mixture needs one weight per point".into()));
                }
                if points.iter().any(|p| p.len() != k * d || p.iter().any(|v| !v.is_finite())) {
                    return Err(Error::Config(format!("mixture points must have {} finite entries", k * d)));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::Config("mixture weights must be nonnegative and sum to 1".into()));
                }
                let mut acc = 0.0;
                let cumulative = weights.iter().map(|w| { acc += w; acc }).collect();
                ThetaSampler::Mixture { points: points.clone(), cumulative }
            }
            PriorFamily::IndependentBeta { alpha, beta } => {
                if d != 1 || alpha.len() != k || beta.len() != k {
                    return Err(Error::Config("beta prior needs dim = 1 and one (alpha, beta) per arm".into()));
                }
                let dists = alpha
                    .iter()
                    .zip(beta)
                    .map(|(&a, &b)| {
                        if !(a > 0.0 && b > 0.0) {
                            return Err(Error::Config(format!("beta prior parameters ({a}, {b}) must be positive")));
                        }
                        Beta::new(a, b).map_err(|e| Error::Config(e.to_string()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                ThetaSampler::Beta(dists)
            }
            PriorFamily::GaussianLinear { mean, cov } => {
                if mean.len() == d {
                    ThetaSampler::GaussianIid(Gaussian::new(mean, cov, "theta prior")?)
                } else if mean.len() == k * d {
                    ThetaSampler::GaussianJoint(Gaussian::new(mean, cov, "theta prior")?)
                } else {
                    return Err(Error::Config(format!("theta prior mean must have {d} or {} entries", k * d)));
                }
            }
            PriorFamily::DatasetBacked { .. } => {
                let data = dataset.ok_or_else(|| Error::Config("dataset-backed prior without a dataset".into()))?;
                if data.dim() != d || data.classes() > k {
                    return Err(Error::Config(format!(
                        "dataset has {} features and {} classes, prior declares dim {d} and {k} arms",
                        data.dim(),
                        data.classes()
                    )));
                }
                if spec.context != ContextModel::DatasetRows || spec.reward != RewardModel::OneHotLabel {
                    return Err(Error::Config("dataset-backed priors use dataset_rows contexts and one_hot_label rewards".into()));
                }
                ThetaSampler::Dataset(data)
            }
        };
        let context = match &spec.context {
            ContextModel::None => {
                if d != 1 {
                    return Err(Error::Config("context model `none` requires dim = 1".into()));
                }
                None
            }
            ContextModel::Gaussian { mean, cov } => {
                if mean.len() != d {
                    return Err(Error::Config(format!("context mean must have {d} entries")));
                }
                Some(Gaussian::new(mean, cov, "context distribution")?)
            }
            ContextModel::DatasetRows => {
                if !matches!(theta, ThetaSampler::Dataset(_)) {
                    return Err(Error::Config("dataset_rows contexts need a dataset-backed prior".into()));
                }
                None
            }
        };
        if spec.reward == RewardModel::OneHotLabel && !matches!(theta, ThetaSampler::Dataset(_)) {
            return Err(Error::Config("one_hot_label rewards need a dataset-backed prior".into()));
        }
        Ok(Self { spec, theta, context })
    }

    /// Dataset-backed prior over an in-memory dataset.
    pub fn from_dataset(dataset: Dataset, arms: usize) -> Result<Self> {
        let spec = PriorSpec {
            arms,
            dim: dataset.dim(),
            family: PriorFamily::DatasetBacked { path: PathBuf::from("<memory>"), bias: false, standardize: false },
            reward: RewardModel::OneHotLabel,
            context: ContextModel::DatasetRows,
        };
        Self::new(spec, Some(Arc::new(dataset)))
    }

    pub fn spec(&self) -> &PriorSpec {
        &self.spec
    }

    pub fn arms(&self) -> usize {
        self.spec.arms
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn reward_model(&self) -> &RewardModel {
        &self.spec.reward
    }

    pub(super) fn sample<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> Result<ProblemInstance> {
        let (k, d) = (self.spec.arms, self.spec.dim);
        let mut theta = Vec::with_capacity(k * d);
        let mut labels = None;
        let mut contexts = Vec::with_capacity(horizon * d);
        match &self.theta {
            ThetaSampler::Mixture { points, cumulative } => {
                let u: f64 = rng.random();
                let idx = cumulative.iter().position(|&c| u < c).unwrap_or(points.len() - 1);
                theta.extend_from_slice(&points[idx]);
            }
            ThetaSampler::Beta(dists) => theta.extend(dists.iter().map(|b| b.sample(rng))),
            ThetaSampler::GaussianIid(g) => (0..k).for_each(|_| g.sample_into(rng, &mut theta)),
            ThetaSampler::GaussianJoint(g) => g.sample_into(rng, &mut theta),
            ThetaSampler::Dataset(data) => {
                let mut order: Vec<usize> = (0..data.rows()).collect();
                order.shuffle(rng);
                let rows: Vec<usize> = order.iter().copied().cycle().take(horizon).collect();
                for &r in &rows {
                    contexts.extend_from_slice(data.features(r));
                }
                labels = Some(rows.iter().map(|&r| data.label(r)).collect());
            }
        }
        match &self.context {
            Some(g) => (0..horizon).for_each(|_| g.sample_into(rng, &mut contexts)),
            None if labels.is_none() => contexts.resize(horizon, 1.0),
            None => {}
        }
        Ok(ProblemInstance { arms: k, dim: d, horizon, theta, contexts, labels })
    }
}
