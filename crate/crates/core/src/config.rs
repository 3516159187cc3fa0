//! Experiment configuration in TOML, its validation, and the named presets.
//!
//! ```toml
//! name = "bernoulli-demo"
//! seed = 7
//! trials = 20
//! horizon = 5000
//!
//! [env]
//! kind = "bernoulli"
//! arms = 10
//! mu_best = 0.5
//! eps_gap = 0.1
//!
//! [[policy]]
//! kind = "sau-sampling"
//!
//! [[policy]]
//! kind = "beta-ts"
//! ```
//!
//! Unknown keys are rejected.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::envs::{
    bernoulli_env, ingest_csv, ingest_reader, standin_financial, standin_statlog, Dataset, DatasetName, LinearEnvSpec,
    DEFAULT_WARMUP,
};
use crate::experiment::Experiment;
use crate::models::NeuralTraining;
use crate::rng::Purpose;
use crate::sau::BonusForm;
use crate::{Error, Result, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Label used in output files; defaults to the environment kind.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub trials: usize,
    pub horizon: usize,
    /// Worker threads for trials.
    #[serde(default = "one")]
    pub jobs: usize,
    pub env: EnvConfig,
    #[serde(rename = "policy")]
    pub policies: Vec<PolicyConfig>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvConfig {
    Bernoulli { arms: usize, mu_best: f64, eps_gap: f64 },
    UniformThreshold { arms: usize, mu_best: f64, eps_gap: f64 },
    Linear(LinearEnvSpec),
    Dataset(DatasetConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: DatasetName,
    /// CSV file; relative paths resolve against the config file's directory. Statlog and
    /// financial fall back to a generated stand-in when absent.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Rows of the generated stand-in.
    #[serde(default)]
    pub standin_rows: Option<usize>,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
}

fn default_warmup() -> usize {
    DEFAULT_WARMUP
}

/// Value model under a SAU or epsilon-greedy policy.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    #[default]
    SampleMean,
    Linear {
        #[serde(default = "unit")]
        lambda: f64,
    },
    Neural(NeuralTraining),
}

fn unit() -> f64 {
    1.0
}

impl ModelConfig {
    fn prefix(&self) -> &'static str {
        match self {
            ModelConfig::SampleMean => "",
            ModelConfig::Linear { .. } => "linear-",
            ModelConfig::Neural(_) => "neural-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerConfig {
    Exact,
    PrecisionDiag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicyConfig {
    SauUcb {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        model: ModelConfig,
        #[serde(default = "unit")]
        prior_s2: f64,
        #[serde(default)]
        bonus: BonusForm,
    },
    SauSampling {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        model: ModelConfig,
        #[serde(default = "unit")]
        prior_s2: f64,
    },
    Ucb1 {
        #[serde(default)]
        label: Option<String>,
    },
    BetaTs {
        #[serde(default)]
        label: Option<String>,
        #[serde(default = "unit")]
        alpha0: f64,
        #[serde(default = "unit")]
        beta0: f64,
    },
    LinearTs {
        #[serde(default)]
        label: Option<String>,
        #[serde(default = "ts_lambda")]
        lambda: f64,
        #[serde(default = "ts_ab")]
        a0: f64,
        #[serde(default = "ts_ab")]
        b0: f64,
        #[serde(default = "exact")]
        sampler: SamplerConfig,
    },
    Greedy {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        model: ModelConfig,
        #[serde(default)]
        epsilon: EpsilonConfig,
    },
    Uniform {
        #[serde(default)]
        label: Option<String>,
    },
    /// Plays the best arm in expectation; a reference point with zero regret.
    Oracle {
        #[serde(default)]
        label: Option<String>,
    },
}

fn ts_lambda() -> f64 {
    0.25
}

fn ts_ab() -> f64 {
    6.0
}

fn exact() -> SamplerConfig {
    SamplerConfig::Exact
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpsilonConfig {
    pub eps0: f64,
    pub eps_min: f64,
    /// Fraction of the horizon over which epsilon decays.
    pub decay_fraction: f64,
}

impl Default for EpsilonConfig {
    fn default() -> Self {
        Self { eps0: 0.1, eps_min: 0.01, decay_fraction: 0.2 }
    }
}

impl PolicyConfig {
    pub fn label(&self) -> String {
        use PolicyConfig::*;
        let explicit = match self {
            SauUcb { label, .. }
            | SauSampling { label, .. }
            | Ucb1 { label }
            | BetaTs { label, .. }
            | LinearTs { label, .. }
            | Greedy { label, .. }
            | Uniform { label }
            | Oracle { label } => label.clone(),
        };
        explicit.unwrap_or_else(|| match self {
            SauUcb { model, .. } => format!("{}sau-ucb", model.prefix()),
            SauSampling { model, .. } => format!("{}sau-sampling", model.prefix()),
            Ucb1 { .. } => "ucb1".into(),
            BetaTs { .. } => "beta-ts".into(),
            LinearTs { sampler: SamplerConfig::Exact, .. } => "linear-ts".into(),
            LinearTs { sampler: SamplerConfig::PrecisionDiag, .. } => "linear-ts-diag".into(),
            Greedy { model, .. } => format!("{}greedy", model.prefix()),
            Uniform { .. } => "uniform".into(),
            Oracle { .. } => "oracle".into(),
        })
    }

    pub(crate) fn model(&self) -> Option<&ModelConfig> {
        match self {
            PolicyConfig::SauUcb { model, .. }
            | PolicyConfig::SauSampling { model, .. }
            | PolicyConfig::Greedy { model, .. } => Some(model),
            _ => None,
        }
    }
}

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(e.message().to_owned() + &span_hint(text, e.span())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    pub fn env_label(&self) -> String {
        self.name.clone().unwrap_or_else(|| match &self.env {
            EnvConfig::Bernoulli { .. } => "bernoulli".into(),
            EnvConfig::UniformThreshold { .. } => "uniform-threshold".into(),
            EnvConfig::Linear(_) => "linear".into(),
            EnvConfig::Dataset(d) => format!("{:?}", d.name).to_lowercase(),
        })
    }

    fn arms_and_dim(&self) -> Option<(usize, usize)> {
        match &self.env {
            EnvConfig::Bernoulli { arms, .. } | EnvConfig::UniformThreshold { arms, .. } => Some((*arms, 0)),
            EnvConfig::Linear(s) => Some((s.arms, s.dim)),
            EnvConfig::Dataset(_) => None,
        }
    }

    /// Checks that do not need the dataset on disk.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(config_err("`trials` must be at least 1"));
        }
        if self.jobs == 0 {
            return Err(config_err("`jobs` must be at least 1"));
        }
        if self.policies.is_empty() {
            return Err(config_err("at least one [[policy]] is required"));
        }
        let mut seen = BTreeSet::new();
        for p in &self.policies {
            let label = p.label();
            if label.is_empty() || label.contains(['/', '\\']) {
                return Err(config_err(format!("policy `label` {label:?} is not usable as a file name")));
            }
            if !seen.insert(label.clone()) {
                return Err(config_err(format!("duplicate policy `label` {label:?}")));
            }
        }
        match &self.env {
            EnvConfig::Bernoulli { arms, mu_best, eps_gap } | EnvConfig::UniformThreshold { arms, mu_best, eps_gap } => {
                bernoulli_env(*arms, *mu_best, *eps_gap).map_err(|e| config_err(format!("env: {e}")))?;
            }
            EnvConfig::Linear(spec) => spec.validate().map_err(|e| config_err(format!("env: {e}")))?,
            EnvConfig::Dataset(d) => {
                let standin = matches!(d.name, DatasetName::Statlog | DatasetName::Financial);
                if d.path.is_none() && !standin {
                    return Err(config_err(format!("env `path` is required for dataset {:?}", d.name)));
                }
            }
        }
        if let Some((k, dim)) = self.arms_and_dim() {
            self.validate_shape(k, dim)?;
        }
        Ok(())
    }

    fn validate_shape(&self, k: usize, dim: usize) -> Result<()> {
        if self.horizon < k {
            return Err(config_err(format!("`horizon` {} is shorter than the {k} arms", self.horizon)));
        }
        let binary = matches!(self.env, EnvConfig::Bernoulli { .. } | EnvConfig::UniformThreshold { .. });
        for p in &self.policies {
            let label = p.label();
            let needs_context = matches!(p, PolicyConfig::LinearTs { .. })
                || matches!(p.model(), Some(ModelConfig::Linear { .. } | ModelConfig::Neural(_)));
            if needs_context && dim == 0 {
                return Err(config_err(format!("policy {label:?} needs contexts but the env has none")));
            }
            if matches!(p, PolicyConfig::BetaTs { .. }) && !binary {
                return Err(config_err(format!("policy {label:?} needs binary rewards")));
            }
        }
        Ok(())
    }

    /// Loads data and checks everything needed to run.
    pub fn prepare(&self, base_dir: &Path) -> Result<Experiment> {
        Experiment::new(self, base_dir)
    }

    pub(crate) fn load_data(&self, base_dir: &Path) -> Result<Option<Arc<Dataset>>> {
        self.validate()?;
        let data = match &self.env {
            EnvConfig::Dataset(d) => Some(Arc::new(load_dataset(d, base_dir, self.seed)?)),
            _ => None,
        };
        if let Some(ds) = &data {
            if self.horizon > ds.len() {
                return Err(config_err(format!("`horizon` {} exceeds the {} dataset rows", self.horizon, ds.len())));
            }
            let k = match &self.env {
                EnvConfig::Dataset(d) if d.name == DatasetName::Mushroom => 2,
                _ => ds.num_classes(),
            };
            self.validate_shape(k, ds.dim())?;
        }
        Ok(data)
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_toml(&text)?, base))
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) if r.start < text.len() => {
            let line = text[..r.start].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        _ => String::new(),
    }
}

fn load_dataset(d: &DatasetConfig, base_dir: &Path, seed: u64) -> Result<Dataset> {
    let schema = d.name.schema();
    match &d.path {
        Some(p) => {
            let path = if p.is_absolute() { p.clone() } else { base_dir.join(p) };
            ingest_csv(&path, &schema)
        }
        None => {
            let mut rng = RngStream::derive(seed, 0, Purpose::Dataset);
            let text = match d.name {
                DatasetName::Statlog => standin_statlog(d.standin_rows.unwrap_or(43_500), &mut rng)?,
                DatasetName::Financial => standin_financial(d.standin_rows.unwrap_or(3713), &mut rng)?,
                other => return Err(config_err(format!("no stand-in for dataset {other:?}"))),
            };
            ingest_reader(text.as_bytes(), &schema)
        }
    }
}

/// Named configurations shipped with the crate.
pub const PRESETS: [(&str, &str); 5] = [
    ("figure1-a", include_str!("../presets/figure1-a.toml")),
    ("figure1-b", include_str!("../presets/figure1-b.toml")),
    ("figure1-c", include_str!("../presets/figure1-c.toml")),
    ("appendixA-bernoulli", include_str!("../presets/appendixA-bernoulli.toml")),
    ("table1-statlog-desk", include_str!("../presets/table1-statlog-desk.toml")),
];

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        let names: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
        config_err(format!("unknown preset `{name}`; expected one of {names:?}"))
    })?;
    ExperimentConfig::from_toml(text)
}
