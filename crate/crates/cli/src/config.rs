//! Pipeline configuration: a TOML file, `XAIQA_<SECTION>_<KEY>` environment
//! overrides, then command-line flags.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use xaiqa::classifier::TrainConfig;
use xaiqa::embedder::EmbedderConfig;
use xaiqa::explainer::MspConfig;
use xaiqa::generator::{Method, DEFAULT_TEMPLATE, DEFAULT_TOP_R};
use xaiqa::hardness::{QcloConfig, DEFAULT_FRACTIONS};
use xaiqa::metrics::BootstrapConfig;
use xaiqa::promptkit::{BudgetUnit, PromptBudget, DEFAULT_NUM_EXAMPLES, DEFAULT_WINDOW_RADIUS};
use xaiqa::Error;

pub const ENV_PREFIX: &str = "XAIQA_";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub corpus: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierBackend {
    #[default]
    Builtin,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub backend: ClassifierBackend,
    pub endpoint: Option<String>,
    pub remote_batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: Option<usize>,
    pub l2: f64,
    pub seed: u64,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            backend: ClassifierBackend::Builtin,
            endpoint: None,
            remote_batch_size: 32,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            l2: t.l2,
            seed: t.seed,
        }
    }
}

impl ClassifierSection {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            l2: self.l2,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSection {
    pub method: Method,
    pub template: String,
    pub top_r: usize,
    pub base_ratio: usize,
    pub synthetic_ratio: usize,
    pub seed: u64,
}

impl Default for GenerationSection {
    fn default() -> Self {
        Self {
            method: Method::Xaiqa,
            template: DEFAULT_TEMPLATE.to_string(),
            top_r: DEFAULT_TOP_R,
            base_ratio: 1,
            synthetic_ratio: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub iterations: usize,
    pub level: f64,
    pub seed: u64,
    /// Hardest-subset fractions reported as extra strata.
    pub strata_fractions: Vec<f64>,
}

impl Default for MetricsSection {
    fn default() -> Self {
        let b = BootstrapConfig::default();
        Self { iterations: b.iterations, level: b.level, seed: b.seed, strata_fractions: DEFAULT_FRACTIONS.to_vec() }
    }
}

impl MetricsSection {
    pub fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig { iterations: self.iterations, level: self.level, seed: self.seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSection {
    pub max_units: usize,
    pub unit: BudgetUnit,
    pub chars_per_token: f64,
    pub num_examples: usize,
    pub window_radius: usize,
    pub seed: u64,
    pub recover_unclosed: bool,
}

impl Default for PromptSection {
    fn default() -> Self {
        let b = PromptBudget::default();
        Self {
            max_units: b.max_units,
            unit: b.unit,
            chars_per_token: b.chars_per_token,
            num_examples: DEFAULT_NUM_EXAMPLES,
            window_radius: DEFAULT_WINDOW_RADIUS,
            seed: 0,
            recover_unclosed: false,
        }
    }
}

impl PromptSection {
    pub fn budget(&self) -> PromptBudget {
        PromptBudget { max_units: self.max_units, unit: self.unit, chars_per_token: self.chars_per_token }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub paths: PathsSection,
    pub classifier: ClassifierSection,
    pub explainer: MspConfig,
    pub embedder: EmbedderConfig,
    pub generation: GenerationSection,
    pub hardness: QcloConfig,
    pub metrics: MetricsSection,
    pub prompt: PromptSection,
}

const SECTIONS: [&str; 8] = ["paths", "classifier", "explainer", "embedder", "generation", "hardness", "metrics", "prompt"];

/// Parses an environment value as a TOML scalar or array, else as a string.
fn env_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn section<T: DeserializeOwned + Default>(table: &toml::Table, name: &str, problems: &mut Vec<String>) -> T {
    match table.get(name) {
        None => T::default(),
        Some(v) => v.clone().try_into().unwrap_or_else(|e: toml::de::Error| {
            problems.push(format!("[{name}] {}", e.message()));
            T::default()
        }),
    }
}

impl PipelineConfig {
    /// Loads `path` (if any), applies environment overrides from `env`, and
    /// reports every problem found at once.
    pub fn load(path: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> Result<Self, Error> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| Error::InvalidConfig(format!("{}: {}", p.display(), e.message())))?
            }
            None => toml::Table::new(),
        };
        let mut problems = Vec::new();
        let mut overrides: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        overrides.sort();
        for (key, raw) in overrides {
            let rest = key[ENV_PREFIX.len()..].to_lowercase();
            // variables such as XAIQA_LOG are not config overrides
            let Some((sec, field)) = rest.split_once('_').filter(|(sec, _)| SECTIONS.contains(sec)) else {
                log::debug!("ignoring environment variable {key}");
                continue;
            };
            let entry = table.entry(sec.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            match entry.as_table_mut() {
                Some(t) => {
                    t.insert(field.to_string(), env_value(&raw));
                }
                None => problems.push(format!("[{sec}] is not a table")),
            }
        }
        for key in table.keys() {
            if !SECTIONS.contains(&key.as_str()) {
                problems.push(format!("unknown section [{key}]"));
            }
        }
        let cfg = Self {
            paths: section(&table, "paths", &mut problems),
            classifier: section(&table, "classifier", &mut problems),
            explainer: section(&table, "explainer", &mut problems),
            embedder: section(&table, "embedder", &mut problems),
            generation: section(&table, "generation", &mut problems),
            hardness: section(&table, "hardness", &mut problems),
            metrics: section(&table, "metrics", &mut problems),
            prompt: section(&table, "prompt", &mut problems),
        };
        problems.extend(cfg.problems());
        if problems.is_empty() { Ok(cfg) } else { Err(Error::InvalidConfig(problems.join("; "))) }
    }

    /// Sets every stage's seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.classifier.seed = seed;
        self.explainer.seed = seed;
        self.embedder.seed = seed;
        self.generation.seed = seed;
        self.metrics.seed = seed;
        self.prompt.seed = seed;
    }

    /// Every validation problem, in section order.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |section: &str, r: Result<(), Error>| {
            if let Err(e) = r {
                let msg = match e {
                    Error::InvalidConfig(m) => m,
                    other => other.to_string(),
                };
                out.extend(msg.split("; ").map(|m| format!("[{section}] {m}")));
            }
        };
        check("classifier", self.classifier.train_config().validate());
        if self.classifier.backend == ClassifierBackend::Remote && self.classifier.endpoint.is_none() {
            check("classifier", Err(Error::InvalidConfig("remote backend needs an endpoint".into())));
        }
        if self.classifier.remote_batch_size == 0 {
            check("classifier", Err(Error::InvalidConfig("remote_batch_size must be positive".into())));
        }
        check("explainer", self.explainer.validate());
        if self.embedder.batch_size == 0 {
            check("embedder", Err(Error::InvalidConfig("batch_size must be positive".into())));
        }
        if self.embedder.dim == 0 {
            check("embedder", Err(Error::InvalidConfig("dim must be positive".into())));
        }
        if !self.generation.template.contains(xaiqa::generator::TEMPLATE_PLACEHOLDER) {
            check("generation", Err(Error::InvalidConfig("template lacks the {X} placeholder".into())));
        }
        if self.generation.top_r == 0 {
            check("generation", Err(Error::InvalidConfig("top_r must be positive".into())));
        }
        if self.generation.base_ratio == 0 || self.generation.synthetic_ratio == 0 {
            check("generation", Err(Error::InvalidConfig("base_ratio and synthetic_ratio must be positive".into())));
        }
        check("hardness", self.hardness.validate());
        check("metrics", self.metrics.bootstrap().validate());
        if let Some(f) = self.metrics.strata_fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            check("metrics", Err(Error::InvalidConfig(format!("strata fraction {f} outside (0, 1]"))));
        }
        check("prompt", self.prompt.budget().validate());
        out
    }
}
