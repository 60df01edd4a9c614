//! Run configuration: a TOML file, command-line overrides on top, and a
//! resolved snapshot written next to the outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusFormat, ScoreKind, DEFAULT_DARR_THRESHOLD};
use crate::error::{Error, Result};
use crate::inference::{ScoringMode, WeightRule};
use crate::metaeval::DocAverage;
use crate::model::{ModelConfig, ModelMode, ProviderSpec};

/// Environment variable naming a directory for remote-embedding caches.
pub const CACHE_DIR_ENV: &str = "MTEVAL_CACHE_DIR";

fn default_run_name() -> String {
    "run".to_string()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

fn default_threshold() -> f64 {
    DEFAULT_DARR_THRESHOLD
}

fn default_precision() -> usize {
    4
}

fn default_kind() -> ScoreKind {
    ScoreKind::Da
}

fn default_provider() -> ProviderSpec {
    ProviderSpec::hashed(32, 2, 7)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_run_name")]
    pub run_name: String,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Overrides `model.seed` when set.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Worker threads for encoding and evaluation; all cores when unset.
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default = "default_provider")]
    pub provider: ProviderSpec,
    /// Partial model configuration merged over the defaults for its mode.
    #[serde(default)]
    pub model: toml::Table,
    #[serde(default)]
    pub ingest: Option<IngestConfig>,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub score: Option<ScoreConfig>,
    #[serde(default)]
    pub evaluate: Option<EvaluateConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub input: PathBuf,
    #[serde(default = "IngestConfig::default_format")]
    pub format: CorpusFormat,
    #[serde(default = "default_kind")]
    pub score_kind: ScoreKind,
    /// Label segments with the TER against their post-edit.
    #[serde(default)]
    pub hter: bool,
    /// Convert DA scores into relative-ranking tuples.
    #[serde(default)]
    pub darr: bool,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub lowercase: bool,
    /// Accept rows without a reference (quality-estimation data).
    #[serde(default)]
    pub allow_missing_reference: bool,
    /// Defaults to `<output_dir>/<run_name>.ingest.tsv`.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl IngestConfig {
    fn default_format() -> CorpusFormat {
        CorpusFormat::DaTsv
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub corpus: PathBuf,
    /// DA_TSV for estimators and DARR_TSV for the ranker when unset.
    #[serde(default)]
    pub format: Option<CorpusFormat>,
    #[serde(default = "default_kind")]
    pub score_kind: ScoreKind,
    /// Defaults to `<output_dir>/<run_name>.ckpt`.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreConfig {
    /// Defaults to the checkpoint written by `train`.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    pub input: PathBuf,
    /// QE for reference-free models, single-reference otherwise.
    #[serde(default)]
    pub mode: Option<ScoringMode>,
    #[serde(default)]
    pub two_permutations: bool,
    /// Also write document scores.
    #[serde(default)]
    pub doc: bool,
    #[serde(default)]
    pub weight_rule: WeightRule,
    /// Records per parallel scoring batch.
    #[serde(default = "ScoreConfig::default_chunk")]
    pub chunk_size: usize,
}

impl ScoreConfig {
    fn default_chunk() -> usize {
        256
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    /// DA_TSV with human scores, joined to metric scores by record id.
    pub human: PathBuf,
    #[serde(default = "default_kind")]
    pub score_kind: ScoreKind,
    /// Metric name to SCORE_TSV path. Defaults to this run's scores.
    #[serde(default)]
    pub metrics: BTreeMap<String, PathBuf>,
    /// Metrics whose lower values mean better translations.
    #[serde(default)]
    pub lower_is_better: Vec<String>,
    #[serde(default = "default_true")]
    pub segment: bool,
    #[serde(default = "default_true")]
    pub system: bool,
    #[serde(default)]
    pub doc: bool,
    #[serde(default)]
    pub doc_average: DocAverage,
    #[serde(default)]
    pub weight_rule: WeightRule,
    #[serde(default)]
    pub top_n: Option<usize>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Weight the average column by item counts.
    #[serde(default)]
    pub weighted: bool,
    #[serde(default = "default_precision")]
    pub precision: usize,
}

impl RunConfig {
    /// Reads a config file (or starts empty) and applies `key.path=value`
    /// overrides before validation.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                toml::from_str::<toml::Table>(&text).map_err(|e| Error::Format {
                    path: p.to_path_buf(),
                    message: e.to_string(),
                })?
            }
            None => toml::Table::new(),
        };
        for (key, value) in overrides {
            set_path(&mut table, key, value)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::contract(format!("invalid configuration: {e}")))?;
        cfg.model_config()?;
        Ok(cfg)
    }

    /// The full model configuration: mode defaults, then the `[model]`
    /// table, then the global seed.
    pub fn model_config(&self) -> Result<ModelConfig> {
        let mode = match self.model.get("mode") {
            Some(v) => v
                .as_str()
                .ok_or_else(|| Error::contract("model.mode must be a string"))?
                .parse::<ModelMode>()?,
            None => ModelMode::Estimator,
        };
        let dim = match self.model.get("embed_dim") {
            Some(v) => v
                .as_integer()
                .and_then(|i| usize::try_from(i).ok())
                .ok_or_else(|| Error::contract("model.embed_dim must be a positive integer"))?,
            None => self.provider_dim(),
        };
        let base = ModelConfig::for_mode(mode, dim);
        let mut table = toml::Table::try_from(&base).map_err(|e| Error::contract(e.to_string()))?;
        for (k, v) in &self.model {
            table.insert(k.clone(), v.clone());
        }
        table.insert("mode".to_string(), toml::Value::String(mode.as_str().to_string()));
        let mut cfg: ModelConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::contract(format!("invalid [model] section: {e}")))?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn provider_dim(&self) -> usize {
        match &self.provider {
            ProviderSpec::Hashed { dim, .. } => *dim,
            ProviderSpec::Remote(r) => r.expected_dim().unwrap_or(32),
            ProviderSpec::Toy { .. } => 32,
        }
    }

    /// Provider spec with the cache directory from the environment filled
    /// in for remote providers that name no cache file.
    pub fn resolved_provider(&self) -> ProviderSpec {
        let mut spec = self.provider.clone();
        if let ProviderSpec::Remote(r) = &mut spec {
            if r.cache_path.is_none() {
                if let Some(dir) = std::env::var_os(CACHE_DIR_ENV) {
                    let file = format!("{}.jsonl", r.provider.replace(['/', '\\'], "_"));
                    r.cache_path = Some(PathBuf::from(dir).join(file));
                }
            }
        }
        spec
    }

    /// The configuration with every default made explicit.
    pub fn resolved(&self) -> Result<Self> {
        let mut out = self.clone();
        out.provider = self.resolved_provider();
        let model = self.model_config()?;
        out.model = toml::Table::try_from(&model).map_err(|e| Error::contract(e.to_string()))?;
        out.seed = Some(model.seed);
        Ok(out)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::contract(format!("cannot render configuration: {e}")))
    }

    pub fn output_path(&self, suffix: &str) -> PathBuf {
        self.output_dir.join(format!("{}.{suffix}", self.run_name))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.train
            .as_ref()
            .and_then(|t| t.checkpoint.clone())
            .unwrap_or_else(|| self.output_path("ckpt"))
    }
}

/// Sets `a.b.c = value` in a TOML table. The value is parsed as a TOML
/// literal when possible and taken as a string otherwise.
pub fn set_path(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::contract(format!("invalid override key `{key}`")));
    }
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::contract(format!("override `{key}`: `{p}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}
