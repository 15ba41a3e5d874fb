//! Experiment files and the bundled registry.

use std::path::{Path, PathBuf};

use gradband_core::env::{Prior, PriorFamily, PriorSpec};
use gradband_core::eval::SweepAxis;
use gradband_core::optimizer::TrainConfig;
use gradband_core::policy::PolicySpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

fn default_instances() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSettings {
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default)]
    pub seed: u64,
    /// Extra policies evaluated next to the experiment's policy.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub compare: Vec<PolicySpec>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { instances: default_instances(), seed: 0, compare: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
}

/// One experiment: a prior, a policy with its initial parameters, and how to
/// train, evaluate, and sweep it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub horizon: usize,
    pub prior: PriorSpec,
    pub policy: PolicySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub eval: EvalSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSettings>,
}

/// Registry entries bundled with the binary, read from `experiments/`.
pub const REGISTRY: &[(&str, &str)] = &[
    ("mixture2", include_str!("../../../experiments/mixture2.toml")),
    ("mixture2_softelim", include_str!("../../../experiments/mixture2_softelim.toml")),
    ("bernoulli10", include_str!("../../../experiments/bernoulli10.toml")),
    ("beta2", include_str!("../../../experiments/beta2.toml")),
    ("beta10", include_str!("../../../experiments/beta10.toml")),
    ("problem1", include_str!("../../../experiments/problem1.toml")),
    ("problem2", include_str!("../../../experiments/problem2.toml")),
    ("problem3", include_str!("../../../experiments/problem3.toml")),
    ("problem4", include_str!("../../../experiments/problem4.toml")),
    ("multiclass_csv", include_str!("../../../experiments/multiclass_csv.toml")),
    ("problem1_cosoftelim_trained", include_str!("../../../experiments/problem1_cosoftelim_trained.toml")),
];

/// Directory that relative paths in registry entries refer to.
pub fn registry_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments")
}

impl ExperimentSpec {
    /// Parse `text`; `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut spec = Self::parse(&text, &path.display().to_string())?;
        spec.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(spec)
    }

    pub fn from_registry(name: &str) -> Result<Self, CliError> {
        let (_, text) = REGISTRY.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            let names: Vec<&str> = REGISTRY.iter().map(|(n, _)| *n).collect();
            CliError::Config(format!("unknown experiment `{name}`; available: {}", names.join(", ")))
        })?;
        let mut spec = Self::parse(text, &format!("experiments/{name}.toml"))?;
        spec.resolve_paths(&registry_dir());
        Ok(spec)
    }

    /// Make dataset and cache paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let PriorFamily::DatasetBacked { path, .. } = &mut self.prior.family {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        for policy in std::iter::once(&mut self.policy).chain(self.eval.compare.iter_mut()) {
            if let PolicySpec::Gittins { cache: Some(path) } = policy {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.eval.seed = seed;
        if let Some(train) = &mut self.train {
            train.seed = seed;
        }
    }

    /// Build the prior and check every policy and setting against it.
    pub fn validate(&self) -> Result<Prior, CliError> {
        let config = |e: gradband_core::Error| CliError::Config(format!("{}: {e}", self.name));
        if self.horizon == 0 {
            return Err(CliError::Config(format!("{}: horizon must be at least 1", self.name)));
        }
        let prior = self.prior.build().map_err(config)?;
        for policy in std::iter::once(&self.policy).chain(&self.eval.compare) {
            if !matches!(policy, PolicySpec::Gittins { .. }) {
                policy.build(&prior, self.horizon).map_err(config)?;
            }
        }
        if let Some(train) = &self.train {
            train.validate().map_err(config)?;
        }
        if self.eval.instances < 2 {
            return Err(CliError::Config(format!("{}: eval.instances must be at least 2", self.name)));
        }
        Ok(prior)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment specs serialize to TOML")
    }
}
