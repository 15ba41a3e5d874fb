//! The policy interface shared by the optimizer and the evaluation harness.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::{Prior, ProblemInstance, RewardModel, RewardTable};
use crate::error::{Error, Result};
use crate::gittins::GittinsTable;
use crate::policy_ctx::{CoSoftElim, ContextualEtc, ContextualTs, EpsGreedy};
use crate::policy_mab::{BernoulliTs, Etc, Exp3, GittinsPolicy, SoftElim, Ucb1, UcbV, Uniform};
use crate::rng::StreamRng;

/// A bandit policy that can play whole episodes.
pub trait BanditPolicy: Send + Sync {
    /// Play one episode against `table` and return the pulled arms.
    ///
    /// When `scores` is given, the policy appends one parameter-shaped score
    /// per round: `grad log pi(I_t | H_t)` for randomized policies, or the sum
    /// of Gaussian scores of all posterior samples for Thompson sampling.
    fn run(
        &self,
        instance: &ProblemInstance,
        table: &RewardTable,
        rng: &mut StreamRng,
        scores: Option<&mut Vec<f64>>,
    ) -> Vec<usize>;

    /// Length of the parameter vector the scores refer to.
    fn num_params(&self) -> usize {
        0
    }
}

/// How CoSoftElim picks its score scale `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum GammaRule {
    /// `1 / sigma^2`, with `sigma = 1/2` for rewards bounded in `[0, 1]`.
    #[default]
    InverseNoise,
    Fixed { value: f64 },
    /// `c_1^{-2}` from the confidence-width constant at `delta = 1/n`, where
    /// `l` bounds `||x||` and `l_star` bounds `||theta||`.
    Theory { l: f64, l_star: f64 },
}

fn default_lambda() -> f64 {
    1.0
}

fn default_zeta() -> f64 {
    1.2
}

fn default_b() -> f64 {
    1.0
}

/// Serializable description of a policy and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    Uniform,
    Exp3 { w: f64 },
    SoftElim { w: f64 },
    Etc { h: f64 },
    Ucb1,
    UcbV {
        #[serde(default = "default_zeta")]
        zeta: f64,
        #[serde(default = "default_b")]
        b: f64,
    },
    BernoulliTs,
    Gittins {
        #[serde(default)]
        cache: Option<PathBuf>,
    },
    /// `w` is the row-major `d x d` projection; `None` means the identity.
    CoSoftElim {
        #[serde(default)]
        w: Option<Vec<f64>>,
        #[serde(default)]
        gamma: GammaRule,
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    ContextualTs {
        #[serde(default)]
        w: Option<Vec<f64>>,
        #[serde(default)]
        sigma: Option<f64>,
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    EpsGreedy {
        eps: f64,
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    ContextualEtc { h: f64 },
}

/// Reward noise scale implied by the prior: the Gaussian `sigma`, or `1/2`
/// for rewards bounded in `[0, 1]`.
pub fn noise_scale(prior: &Prior) -> f64 {
    match *prior.reward_model() {
        RewardModel::Gaussian { sigma } => sigma,
        _ => 0.5,
    }
}

fn projection(w: &Option<Vec<f64>>, d: usize) -> Result<Vec<f64>> {
    match w {
        None => Ok(crate::linalg::identity(d)),
        Some(w) if w.len() == d * d && w.iter().all(|v| v.is_finite()) => Ok(w.clone()),
        Some(w) => Err(Error::Config(format!("projection has {} entries, expected {} finite values", w.len(), d * d))),
    }
}

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Exp3 { .. } => "exp3",
            Self::SoftElim { .. } => "soft_elim",
            Self::Etc { .. } => "etc",
            Self::Ucb1 => "ucb1",
            Self::UcbV { .. } => "ucb_v",
            Self::BernoulliTs => "bernoulli_ts",
            Self::Gittins { .. } => "gittins",
            Self::CoSoftElim { .. } => "co_soft_elim",
            Self::ContextualTs { .. } => "contextual_ts",
            Self::EpsGreedy { .. } => "eps_greedy",
            Self::ContextualEtc { .. } => "contextual_etc",
        }
    }

    /// Instantiate the policy for `prior` and horizon `n`.
    pub fn build(&self, prior: &Prior, horizon: usize) -> Result<Box<dyn BanditPolicy>> {
        let (k, d) = (prior.arms(), prior.dim());
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Config(format!("{} parameter {name} = {v} must be positive", self.name())))
            }
        };
        Ok(match self {
            Self::Uniform => Box::new(Uniform),
            Self::Exp3 { w } => {
                if !(*w > 0.0 && *w <= 1.0) {
                    return Err(Error::Config(format!("exp3 parameter w = {w} must lie in (0, 1]")));
                }
                Box::new(Exp3::new(*w))
            }
            Self::SoftElim { w } => Box::new(SoftElim::new(positive("w", *w)?)),
            Self::Etc { h } => Box::new(Etc::new(self.clamped_h(*h, horizon)?)),
            Self::Ucb1 => Box::new(Ucb1),
            Self::UcbV { zeta, b } => Box::new(UcbV::new(positive("zeta", *zeta)?, positive("b", *b)?)),
            Self::BernoulliTs => Box::new(BernoulliTs),
            Self::Gittins { cache } => {
                let table = match cache {
                    Some(path) => GittinsTable::load_or_build(path, horizon)?,
                    None => GittinsTable::build(horizon)?,
                };
                Box::new(GittinsPolicy::new(Arc::new(table)))
            }
            Self::CoSoftElim { w, gamma, lambda } => {
                let lambda = positive("lambda", *lambda)?;
                let gamma = match *gamma {
                    GammaRule::InverseNoise => {
                        let sigma = noise_scale(prior);
                        if sigma > 0.0 { 1.0 / (sigma * sigma) } else { 1.0 }
                    }
                    GammaRule::Fixed { value } => positive("gamma", value)?,
                    GammaRule::Theory { l, l_star } => crate::policy_ctx::theory_gamma(
                        k,
                        d,
                        horizon,
                        noise_scale(prior),
                        lambda,
                        l,
                        l_star,
                        1.0 / horizon as f64,
                    ),
                };
                Box::new(CoSoftElim::new(d, projection(w, d)?, gamma, lambda))
            }
            Self::ContextualTs { w, sigma, lambda } => {
                let sigma = sigma.unwrap_or_else(|| noise_scale(prior));
                Box::new(ContextualTs::new(d, projection(w, d)?, positive("sigma", sigma)?, positive("lambda", *lambda)?))
            }
            Self::EpsGreedy { eps, lambda } => {
                if !(0.0..=1.0).contains(eps) {
                    return Err(Error::Config(format!("eps_greedy parameter eps = {eps} must lie in [0, 1]")));
                }
                Box::new(EpsGreedy::new(d, *eps, positive("lambda", *lambda)?))
            }
            Self::ContextualEtc { h } => Box::new(ContextualEtc::new(self.clamped_h(*h, horizon)?)),
        })
    }

    fn clamped_h(&self, h: f64, horizon: usize) -> Result<f64> {
        if !h.is_finite() {
            return Err(Error::Config(format!("{} parameter h = {h} is not finite", self.name())));
        }
        let upper = (horizon / 2).max(1) as f64;
        let clamped = h.clamp(1.0, upper);
        if clamped != h {
            log::warn!("{}: h = {h} clamped to {clamped}", self.name());
        }
        Ok(clamped)
    }

    /// Current tunable parameters, or `None` for non-differentiable policies.
    pub fn params(&self, dim: usize) -> Option<Vec<f64>> {
        match self {
            Self::Exp3 { w } | Self::SoftElim { w } => Some(vec![*w]),
            Self::Etc { h } | Self::ContextualEtc { h } => Some(vec![*h]),
            Self::EpsGreedy { eps, .. } => Some(vec![*eps]),
            Self::CoSoftElim { w, .. } | Self::ContextualTs { w, .. } => Some(projection(w, dim).ok()?),
            _ => None,
        }
    }

    /// Copy of `self` with the tunable parameters replaced by `params`.
    pub fn with_params(&self, params: &[f64]) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::Exp3 { w } | Self::SoftElim { w } => *w = params[0],
            Self::Etc { h } | Self::ContextualEtc { h } => *h = params[0],
            Self::EpsGreedy { eps, .. } => *eps = params[0],
            Self::CoSoftElim { w, .. } | Self::ContextualTs { w, .. } => *w = Some(params.to_vec()),
            _ => {}
        }
        out
    }

    /// Clamp `params` into the feasible set.
    pub fn project(&self, params: &mut [f64], horizon: usize) {
        match self {
            Self::Exp3 { .. } => params[0] = params[0].clamp(1e-3, 1.0),
            Self::SoftElim { .. } => params[0] = params[0].max(1e-3),
            Self::Etc { .. } | Self::ContextualEtc { .. } => {
                params[0] = params[0].clamp(1.0, (horizon / 2).max(1) as f64)
            }
            Self::EpsGreedy { .. } => params[0] = params[0].clamp(0.0, 1.0),
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::PriorSpec;

    #[test]
    fn params_round_trip_and_projection() {
        let spec = PolicySpec::SoftElim { w: 1.0 };
        assert_eq!(spec.params(1), Some(vec![1.0]));
        let moved = spec.with_params(&[-2.0]);
        let mut p = moved.params(1).unwrap();
        moved.project(&mut p, 200);
        assert_eq!(p, vec![1e-3]);

        let etc = PolicySpec::Etc { h: 5.5 };
        let mut h = vec![500.0];
        etc.project(&mut h, 200);
        assert_eq!(h, vec![100.0]);

        let co = PolicySpec::CoSoftElim { w: None, gamma: GammaRule::InverseNoise, lambda: 1.0 };
        assert_eq!(co.params(2), Some(vec![1.0, 0.0, 0.0, 1.0]));
        assert!(PolicySpec::Ucb1.params(1).is_none());
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        let prior = PriorSpec::mixture2().build().unwrap();
        assert!(PolicySpec::Exp3 { w: 0.0 }.build(&prior, 10).is_err());
        assert!(PolicySpec::SoftElim { w: -1.0 }.build(&prior, 10).is_err());
        assert!(PolicySpec::EpsGreedy { eps: 1.5, lambda: 1.0 }.build(&prior, 10).is_err());
        let bad_w = PolicySpec::CoSoftElim { w: Some(vec![1.0; 3]), gamma: GammaRule::InverseNoise, lambda: 1.0 };
        assert!(bad_w.build(&prior, 10).is_err());
        assert!(PolicySpec::Etc { h: 1000.0 }.build(&prior, 10).is_ok());
    }

    #[test]
    fn spec_parses_from_toml() {
        let spec: PolicySpec = toml::from_str("kind = \"co_soft_elim\"\nlambda = 2.0\n[gamma]\nrule = \"fixed\"\nvalue = 3.0\n").unwrap();
        assert_eq!(spec, PolicySpec::CoSoftElim { w: None, gamma: GammaRule::Fixed { value: 3.0 }, lambda: 2.0 });
        let ucbv: PolicySpec = toml::from_str("kind = \"ucb_v\"").unwrap();
        assert_eq!(ucbv, PolicySpec::UcbV { zeta: 1.2, b: 1.0 });
    }
}
