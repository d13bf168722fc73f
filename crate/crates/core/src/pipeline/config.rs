//! Pipeline configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//!
//! [paths]
//! corpus = "corpus"
//! passages = "out/passages.jsonl"
//!
//! [chunk]
//! max_tokens = 256
//! sample_size = 50000
//!
//! [annotate]
//! endpoint = "mock:responses.jsonl"
//! variant = "type"
//!
//! [build]
//! template = "per-type"
//! negatives = "frequency"
//! neg_k = 2
//! ```
//!
//! Every key is optional. Command-line flags override file values, which
//! override the defaults; see [`apply`].

use std::fmt::Debug;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::conversation::{NegativeStrategy, TemplateVariant};
use crate::gateway::{GatewayConfig, PromptVariant};
use crate::sampler::ChunkConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// A directory of `.txt` files or a JSONL file of articles.
    pub corpus: PathBuf,
    pub passages: PathBuf,
    pub annotations: PathBuf,
    pub stats: PathBuf,
    pub conversations: PathBuf,
    /// Dataset file fed to `process`.
    pub raw_benchmark: PathBuf,
    pub labelmap: PathBuf,
    pub benchmark: PathBuf,
    pub predictions: PathBuf,
    pub report: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            corpus: "corpus".into(),
            passages: "passages.jsonl".into(),
            annotations: "annotations.jsonl".into(),
            stats: "stats.json".into(),
            conversations: "conversations.jsonl".into(),
            raw_benchmark: "raw_benchmark.conll".into(),
            labelmap: "labelmap.json".into(),
            benchmark: "benchmark.jsonl".into(),
            predictions: "predictions.jsonl".into(),
            report: "report.json".into(),
        }
    }
}

impl Paths {
    pub fn all(&self) -> [(&'static str, &Path); 10] {
        [
            ("corpus", &self.corpus),
            ("passages", &self.passages),
            ("annotations", &self.annotations),
            ("stats", &self.stats),
            ("conversations", &self.conversations),
            ("raw_benchmark", &self.raw_benchmark),
            ("labelmap", &self.labelmap),
            ("benchmark", &self.benchmark),
            ("predictions", &self.predictions),
            ("report", &self.report),
        ]
    }

    /// Resolves relative paths against `base`.
    pub fn rebase(&mut self, base: &Path) {
        for p in [
            &mut self.corpus,
            &mut self.passages,
            &mut self.annotations,
            &mut self.stats,
            &mut self.conversations,
            &mut self.raw_benchmark,
            &mut self.labelmap,
            &mut self.benchmark,
            &mut self.predictions,
            &mut self.report,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkSettings {
    pub max_tokens: usize,
    pub sample_size: usize,
}

impl Default for ChunkSettings {
    fn default() -> Self {
        let c = ChunkConfig::default();
        ChunkSettings {
            max_tokens: c.max_tokens,
            sample_size: c.sample_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotateSettings {
    /// `http(s)://...` or `mock:FILE`.
    pub endpoint: String,
    pub model: String,
    pub variant: String,
    pub concurrency: usize,
    pub retry_limit: usize,
    pub timeout_secs: u64,
    pub retry_backoff_ms: u64,
}

impl Default for AnnotateSettings {
    fn default() -> Self {
        let g = GatewayConfig::default();
        AnnotateSettings {
            endpoint: g.endpoint,
            model: g.model,
            variant: "type".into(),
            concurrency: g.max_concurrency,
            retry_limit: g.retry_limit,
            timeout_secs: g.timeout.as_secs(),
            retry_backoff_ms: g.retry_backoff.as_millis() as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuildSource {
    /// Model annotations (`annotations.jsonl`).
    #[default]
    Annotations,
    /// Supervised records (`benchmark.jsonl`).
    Benchmark,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildSettings {
    pub source: BuildSource,
    pub template: String,
    /// `none`, `uniform` or `frequency`.
    pub negatives: String,
    pub neg_k: usize,
    pub dataset_field: bool,
}

impl Default for BuildSettings {
    fn default() -> Self {
        BuildSettings {
            source: BuildSource::Annotations,
            template: "per-type".into(),
            negatives: "frequency".into(),
            neg_k: crate::conversation::DEFAULT_NEGATIVES_PER_EXAMPLE,
            dataset_field: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessSettings {
    /// `conll` or `spans`.
    pub format: String,
    pub dataset: String,
    pub domain: String,
    pub cap: usize,
}

impl Default for ProcessSettings {
    fn default() -> Self {
        ProcessSettings {
            format: "conll".into(),
            dataset: String::new(),
            domain: String::new(),
            cap: crate::benchmark::DEFAULT_QUERY_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    /// Headline the partial-match F1 instead of strict.
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub log_level: String,
    pub paths: Paths,
    pub chunk: ChunkSettings,
    pub annotate: AnnotateSettings,
    pub build: BuildSettings,
    pub process: ProcessSettings,
    pub eval: EvalSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            log_level: "info".into(),
            paths: Paths::default(),
            chunk: ChunkSettings::default(),
            annotate: AnnotateSettings::default(),
            build: BuildSettings::default(),
            process: ProcessSettings::default(),
            eval: EvalSettings::default(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| config_err(e.to_string().trim().replace('\n', " ")))
    }

    /// Reads a config file. Relative paths inside it stay relative to the
    /// working directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let all = self.paths.all();
        for (i, (a, pa)) in all.iter().enumerate() {
            for (b, pb) in &all[i + 1..] {
                if pa == pb {
                    return Err(config_err(format!(
                        "paths.{a} and paths.{b} are both {}",
                        pa.display()
                    )));
                }
            }
        }
        self.chunk_config().validate().map_err(|e| config_err(e.to_string()))?;
        if self.annotate.concurrency == 0 {
            return Err(config_err("annotate.concurrency must be at least 1"));
        }
        self.prompt_variant()?;
        self.template()?;
        self.negative_strategy()?;
        match self.process.format.as_str() {
            "conll" | "spans" => Ok(()),
            other => Err(config_err(format!("unknown process.format {other:?} (expected conll|spans)"))),
        }
    }

    pub fn chunk_config(&self) -> ChunkConfig {
        ChunkConfig {
            max_tokens: self.chunk.max_tokens,
            sample_size: self.chunk.sample_size,
            seed: self.seed,
        }
    }

    pub fn gateway_config(&self) -> GatewayConfig {
        GatewayConfig {
            endpoint: self.annotate.endpoint.clone(),
            model: self.annotate.model.clone(),
            max_concurrency: self.annotate.concurrency,
            retry_limit: self.annotate.retry_limit,
            timeout: Duration::from_secs(self.annotate.timeout_secs),
            retry_backoff: Duration::from_millis(self.annotate.retry_backoff_ms),
        }
    }

    pub fn prompt_variant(&self) -> Result<PromptVariant, PipelineError> {
        self.annotate.variant.parse().map_err(config_err)
    }

    pub fn template(&self) -> Result<TemplateVariant, PipelineError> {
        self.build.template.parse().map_err(config_err)
    }

    pub fn negative_strategy(&self) -> Result<NegativeStrategy, PipelineError> {
        let k = self.build.neg_k;
        match self.build.negatives.as_str() {
            "none" => Ok(NegativeStrategy::None),
            "uniform" => Ok(NegativeStrategy::Uniform { k }),
            "frequency" => Ok(NegativeStrategy::Frequency { k }),
            other => Err(config_err(format!(
                "unknown negative strategy {other:?} (expected none|uniform|frequency)"
            ))),
        }
    }
}

/// Applies a command-line value over the configured one. A flag that changes
/// the value is logged.
pub fn apply<T: PartialEq + Debug>(slot: &mut T, flag: Option<T>, name: &str) {
    if let Some(v) = flag {
        if *slot != v {
            log::info!("--{name} {v:?} overrides configured value {:?}", slot);
        }
        *slot = v;
    }
}
