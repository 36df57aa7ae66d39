use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rcmdp_core::instance::{generate_instance, GeneratorSpec};
use rcmdp_core::uncertainty::{discrete_metric, line_metric};
use rcmdp_core::{ActorConfig, CriticConfig, PolicyTable, TabularRcmdp, UncertaintyModel};

use crate::error::{BenchError, Result};

/// Where the instance comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceSource {
    Inline(TabularRcmdp),
    /// Generated with the experiment's root seed.
    Generator(GeneratorSpec),
    File(PathBuf),
}

impl InstanceSource {
    pub fn resolve(&self, seed: u64, base: &Path) -> Result<TabularRcmdp> {
        match self {
            Self::Inline(mdp) => Ok(mdp.clone()),
            Self::Generator(spec) => Ok(generate_instance(spec, seed)?),
            Self::File(path) => read_json(&base.join(path)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedMetric {
    #[default]
    Line,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    Named(NamedMetric),
    Matrix(Vec<Vec<f64>>),
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self::Named(NamedMetric::Line)
    }
}

/// Uncertainty set family; the radius comes from the radius list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SetSpec {
    Contamination,
    TotalVariation,
    Wasserstein {
        #[serde(default = "one")]
        order: f64,
        #[serde(default)]
        metric: MetricSpec,
    },
}

fn one() -> f64 {
    1.0
}

fn one_rep() -> usize {
    1
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl SetSpec {
    pub fn model(&self, radius: f64, n_states: usize) -> Result<UncertaintyModel> {
        let model = match self {
            Self::Contamination => UncertaintyModel::contamination(radius)?,
            Self::TotalVariation => UncertaintyModel::total_variation(radius)?,
            Self::Wasserstein { order, metric } => {
                let metric = match metric {
                    MetricSpec::Named(NamedMetric::Line) => line_metric(n_states),
                    MetricSpec::Named(NamedMetric::Discrete) => discrete_metric(n_states),
                    MetricSpec::Matrix(m) => m.clone(),
                };
                UncertaintyModel::wasserstein(*order, radius, metric)?
            }
        };
        model.check_dims(n_states)?;
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    pub uncertainty: SetSpec,
    pub radii: Vec<f64>,
    #[serde(default)]
    pub actor: ActorConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "one_rep")]
    pub repetitions: usize,
}

impl ExperimentConfig {
    pub fn check(&self) -> Result<()> {
        if self.radii.is_empty() {
            return Err(BenchError::Config("radius list is empty".into()));
        }
        if self.repetitions == 0 {
            return Err(BenchError::Config("repetitions must be at least 1".into()));
        }
        self.actor.check()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    #[default]
    Oracle,
    Critic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicySource {
    Inline(PolicyTable),
    File(PathBuf),
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub instance: InstanceSource,
    pub policy: PolicySource,
    pub uncertainty: SetSpec,
    pub radius: f64,
    #[serde(default)]
    pub mode: EvalMode,
    /// Budgets for critic mode.
    #[serde(default)]
    pub critic: CriticConfig,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub zeta: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_epsilon() -> f64 {
    0.05
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_json(&text, path)
}

pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| BenchError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn parse_radii(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|item| {
            item.trim()
                .parse::<f64>()
                .map_err(|_| BenchError::Config(format!("bad radius {item:?}")))
        })
        .collect()
}
