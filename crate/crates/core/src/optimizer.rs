//! Policy-gradient ascent on the Bayes reward.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Prior;
use crate::error::{Error, Result};
use crate::estimator::{estimate_gradient, simulate_batch, BaselineKind};
use crate::eval::{bayes_regret, csv_writer};
use crate::policy::PolicySpec;
use crate::rng::{stream, Purpose};

fn default_quantile() -> f64 {
    0.95
}

fn default_eval_instances() -> usize {
    1000
}

/// Which norm distribution the automatic rule bounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormScale {
    /// Norms of single-episode contributions.
    Episode,
    /// Norms of batch means of size `m`, by resampling the pilot episodes.
    #[default]
    Batch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AlphaRule {
    /// `alpha = 1 / (c sqrt(L))` where `c` is a quantile of pilot gradient norms.
    Auto {
        /// Defaults to `max(30, m)`.
        #[serde(default)]
        pilot_batch: Option<usize>,
        #[serde(default = "default_quantile")]
        quantile: f64,
        #[serde(default)]
        scale: NormScale,
    },
    Fixed { alpha: f64 },
}

impl Default for AlphaRule {
    fn default() -> Self {
        Self::Auto { pilot_batch: None, quantile: default_quantile(), scale: NormScale::Batch }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub alpha: AlphaRule,
    #[serde(default)]
    pub baseline: BaselineKind,
    #[serde(default)]
    pub seed: u64,
    /// Iterations between held-out evaluations; 0 disables them.
    #[serde(default)]
    pub eval_every: usize,
    #[serde(default = "default_eval_instances")]
    pub eval_instances: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            batch_size: 1000,
            alpha: AlphaRule::default(),
            baseline: BaselineKind::default(),
            seed: 0,
            eval_every: 0,
            eval_instances: default_eval_instances(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        match self.alpha {
            AlphaRule::Fixed { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::Config(format!("learning rate {alpha} must be positive")))
            }
            AlphaRule::Auto { pilot_batch: Some(p), .. } if p < 30 => {
                Err(Error::Config(format!("pilot batch {p} is below 30")))
            }
            AlphaRule::Auto { quantile, .. } if !(quantile > 0.0 && quantile <= 1.0) => {
                Err(Error::Config(format!("quantile {quantile} outside (0, 1]")))
            }
            _ if self.eval_every > 0 && self.eval_instances < 2 => {
                Err(Error::Config("eval_instances must be at least 2".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Value at rank `ceil(q N)` of the sorted sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

const BOOTSTRAP_BATCHES: usize = 200;

/// High-probability bound `c` on the gradient norm at the initial parameters.
pub fn auto_learning_rate(spec: &PolicySpec, prior: &Prior, horizon: usize, config: &TrainConfig) -> Result<f64> {
    let AlphaRule::Auto { pilot_batch, quantile: q, scale } = config.alpha else {
        return Err(Error::Config("auto_learning_rate called with a fixed learning rate".into()));
    };
    let pilot = pilot_batch.unwrap_or(config.batch_size.max(30));
    if pilot < 30 {
        return Err(Error::Config(format!("pilot batch {pilot} is below 30")));
    }
    let policy = spec.build(prior, horizon)?;
    let outcomes = simulate_batch(&*policy, prior, horizon, config.baseline, pilot, Purpose::pilot_lanes(), config.seed, 0)?;
    let norms: Vec<f64> = match scale {
        NormScale::Episode => outcomes.iter().map(|o| crate::linalg::frobenius(&o.contribution)).collect(),
        NormScale::Batch => {
            let mut rng = stream(config.seed, Purpose::Misc, 0, 0);
            let p = outcomes[0].contribution.len();
            let m = config.batch_size;
            (0..BOOTSTRAP_BATCHES)
                .map(|_| {
                    let mut mean = vec![0.0; p];
                    for _ in 0..m {
                        let o = &outcomes[rng.random_range(0..outcomes.len())];
                        mean.iter_mut().zip(&o.contribution).for_each(|(a, c)| *a += c / m as f64);
                    }
                    crate::linalg::frobenius(&mean)
                })
                .collect()
        }
    };
    if norms.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient { iteration: 0, params: spec.params(prior.dim()).unwrap_or_default() });
    }
    let c = quantile(&norms, q);
    if c <= 0.0 {
        log::warn!("pilot gradients are all zero; using c = 1");
        return Ok(1.0);
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub params: Vec<f64>,
    /// Norm of the gradient estimate taken at `params`; absent on the final row.
    pub grad_norm: Option<f64>,
    pub spread: Option<f64>,
    pub eval_regret_mean: Option<f64>,
    pub eval_regret_stderr: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub rows: Vec<TraceRow>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl TrainTrace {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let p = self.rows.first().map_or(0, |r| r.params.len());
        let mut w = csv_writer(path)?;
        let mut header = vec!["iteration".to_string()];
        header.extend((0..p).map(|i| format!("param_{i}")));
        header.extend(["grad_norm", "spread", "eval_regret_mean", "eval_regret_stderr"].map(String::from));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.iteration.to_string()];
            rec.extend(r.params.iter().map(f64::to_string));
            rec.extend([cell(r.grad_norm), cell(r.spread), cell(r.eval_regret_mean), cell(r.eval_regret_stderr)]);
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub policy: PolicySpec,
    pub params: Vec<f64>,
    pub alpha: f64,
    /// Gradient-norm bound from the automatic rule, when used.
    pub c: Option<f64>,
    pub trace: TrainTrace,
}

/// Run `config.iterations` steps of `w <- proj(w + alpha g)` from the
/// parameters in `spec`.
pub fn run_gradband(spec: &PolicySpec, prior: &Prior, horizon: usize, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let mut params = spec
        .params(prior.dim())
        .ok_or_else(|| Error::Config(format!("policy {} has no trainable parameters", spec.name())))?;
    spec.build(prior, horizon)?;
    let (alpha, c) = match config.alpha {
        AlphaRule::Fixed { alpha } => (alpha, None),
        AlphaRule::Auto { .. } if config.iterations == 0 => (0.0, None),
        AlphaRule::Auto { .. } => {
            let c = auto_learning_rate(spec, prior, horizon, config)?;
            (1.0 / (c * (config.iterations as f64).sqrt()), Some(c))
        }
    };
    spec.project(&mut params, horizon);
    let mut rows = Vec::with_capacity(config.iterations + 1);
    let evaluate = |iteration: usize, current: &PolicySpec| -> Result<(Option<f64>, Option<f64>)> {
        let due = config.eval_every > 0 && (iteration.is_multiple_of(config.eval_every) || iteration == config.iterations);
        if !due {
            return Ok((None, None));
        }
        let policy = current.build(prior, horizon)?;
        let report = bayes_regret(&*policy, prior, horizon, config.eval_instances, config.seed)?;
        Ok((Some(report.regret_mean), Some(report.regret_stderr)))
    };
    for iteration in 0..config.iterations {
        let current = spec.with_params(&params);
        let policy = current.build(prior, horizon)?;
        let estimate = estimate_gradient(
            &*policy,
            prior,
            horizon,
            config.baseline,
            config.batch_size,
            Purpose::train_lanes(),
            config.seed,
            iteration as u64,
        )?;
        if estimate.mean.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { iteration, params });
        }
        let (eval_regret_mean, eval_regret_stderr) = evaluate(iteration, &current)?;
        let grad_norm = estimate.norm();
        log::info!("iteration {iteration}: |g| = {grad_norm:.4}, regret {:.4}", estimate.mean_regret);
        rows.push(TraceRow {
            iteration,
            params: params.clone(),
            grad_norm: Some(grad_norm),
            spread: Some(estimate.spread),
            eval_regret_mean,
            eval_regret_stderr,
        });
        params.iter_mut().zip(&estimate.mean).for_each(|(w, g)| *w += alpha * g);
        spec.project(&mut params, horizon);
    }
    let policy = spec.with_params(&params);
    let (eval_regret_mean, eval_regret_stderr) = evaluate(config.iterations, &policy)?;
    rows.push(TraceRow {
        iteration: config.iterations,
        params: params.clone(),
        grad_norm: None,
        spread: None,
        eval_regret_mean,
        eval_regret_stderr,
    });
    Ok(TrainOutcome { policy, params, alpha, c, trace: TrainTrace { rows } })
}
