//! File-to-file pipeline stages.
//!
//! ```text
//! chunk -> annotate -> stats -> build
//! process -> eval
//! ```
//!
//! Each stage reads its prerequisites from the configured paths, writes one
//! artifact atomically and a manifest beside it (see [`manifest`]). A missing
//! prerequisite is reported before any work starts. All outputs are
//! deterministic for a fixed seed and inputs.

pub mod config;
pub mod demo;
pub mod manifest;

use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;

use crate::benchmark::{self, LabelMap};
use crate::conversation::{self, NegativeSampling, NegativeStrategy};
use crate::eval;
use crate::exec::Execution;
use crate::gateway;
use crate::model::{self, AnnotatedPassage, AnnotationStatus, BenchmarkRecord, Passage, RawPrediction, Record};
use crate::sampler;
use crate::stats::{self, StatsFile, TypeFrequencyTable};

pub use config::{BuildSource, PipelineConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("missing prerequisite {path}: {hint}")]
    MissingPrerequisite { path: String, hint: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("bad input {path}: {message}")]
    Input { path: String, message: String },
    #[error("{stage} failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("{artifact} differs from the golden copy")]
    GoldenMismatch { artifact: String },
    #[error("{count} stale artifact(s): {details}")]
    Stale { count: usize, details: String },
}

impl PipelineError {
    /// Stable machine-readable error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::MissingPrerequisite { .. } => "missing_prerequisite",
            PipelineError::Config(_) => "config_error",
            PipelineError::Io { .. } => "io_error",
            PipelineError::Input { .. } => "input_error",
            PipelineError::Stage { .. } => "stage_error",
            PipelineError::GoldenMismatch { .. } => "golden_mismatch",
            PipelineError::Stale { .. } => "stale_artifacts",
        }
    }

    /// The file the error is about, when there is one.
    pub fn path(&self) -> Option<&str> {
        match self {
            PipelineError::MissingPrerequisite { path, .. }
            | PipelineError::Io { path, .. }
            | PipelineError::Input { path, .. } => Some(path),
            PipelineError::GoldenMismatch { artifact } => Some(artifact),
            _ => None,
        }
    }

    /// One-line JSON form for machine consumers.
    pub fn to_json_line(&self) -> String {
        let mut v = json!({"error": self.kind(), "message": self.to_string()});
        if let Some(p) = self.path() {
            v["path"] = json!(p);
        }
        v.to_string()
    }
}

fn stage_err(stage: &'static str) -> impl Fn(&dyn std::fmt::Display) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        message: e.to_string(),
    }
}

fn require(path: &Path, hint: &str) -> Result<(), PipelineError> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::MissingPrerequisite {
            path: path.display().to_string(),
            hint: hint.to_owned(),
        })
    }
}

fn read_text(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn read_records<R: Record>(path: &Path) -> Result<Vec<R>, PipelineError> {
    let file = std::fs::File::open(path).map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    model::read_jsonl(BufReader::new(file)).map_err(|e| PipelineError::Input {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn read_stats(path: &Path) -> Result<TypeFrequencyTable, PipelineError> {
    let f: StatsFile = serde_json::from_str(&read_text(path)?).map_err(|e| PipelineError::Input {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(f.table())
}

fn pretty<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serializes");
    s.push('\n');
    s.into_bytes()
}

/// What a stage produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub stage: &'static str,
    pub artifact: PathBuf,
    pub summary: String,
}

pub fn chunk(cfg: &PipelineConfig, exec: Execution) -> Result<StageOutcome, PipelineError> {
    let p = &cfg.paths;
    require(&p.corpus, "point paths.corpus or --input at a directory of .txt files or an articles JSONL")?;
    let chunk_cfg = cfg.chunk_config();
    chunk_cfg.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
    let articles = sampler::read_articles(&p.corpus).map_err(|e| PipelineError::Input {
        path: p.corpus.display().to_string(),
        message: e.to_string(),
    })?;
    let chunks = sampler::chunk_corpus(&articles, &chunk_cfg, exec);
    let total = chunks.len();
    let passages = sampler::sample_passages(chunks, &chunk_cfg);
    let settings = json!({"max_tokens": chunk_cfg.max_tokens, "sample_size": chunk_cfg.sample_size, "seed": cfg.seed});
    manifest::write_artifact(
        &p.passages,
        model::to_jsonl_string(&passages).as_bytes(),
        "chunk",
        &settings,
        &[&p.corpus],
    )?;
    Ok(StageOutcome {
        stage: "chunk",
        artifact: p.passages.clone(),
        summary: format!(
            "{} articles, {total} chunks, {} passages sampled",
            articles.len(),
            passages.len()
        ),
    })
}

pub fn annotate(cfg: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let p = &cfg.paths;
    require(&p.passages, "run `forge chunk` first")?;
    let gw = cfg.gateway_config();
    if gw.endpoint.is_empty() {
        return Err(PipelineError::Config(
            "annotate needs an endpoint (http(s) URL or mock:FILE)".into(),
        ));
    }
    let mock = gw.endpoint.strip_prefix("mock:").map(PathBuf::from);
    if let Some(m) = &mock {
        require(m, "the mock endpoint names a JSONL of {passage_id, response}")?;
    }
    let variant = cfg.prompt_variant()?;
    let passages: Vec<Passage> = read_records(&p.passages)?;
    let backend = gateway::backend_for(&gw).map_err(|e| PipelineError::Config(e.to_string()))?;
    let out = gateway::annotate(&passages, variant, backend.as_ref(), &gw).map_err(|e| stage_err("annotate")(&e))?;

    let mut by_status: BTreeMap<String, usize> = BTreeMap::new();
    for a in &out {
        let key = match a.status() {
            AnnotationStatus::Ok => "ok".to_owned(),
            AnnotationStatus::Malformed(r) => r.to_string(),
        };
        *by_status.entry(key).or_default() += 1;
    }
    let mut inputs: Vec<&Path> = vec![&p.passages];
    if let Some(m) = &mock {
        inputs.push(m);
    }
    let endpoint = if mock.is_some() { "mock" } else { gw.endpoint.as_str() };
    let settings = json!({"endpoint": endpoint, "model": gw.model, "variant": cfg.annotate.variant});
    manifest::write_artifact(&p.annotations, model::to_jsonl_string(&out).as_bytes(), "annotate", &settings, &inputs)?;
    let summary = by_status
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(StageOutcome {
        stage: "annotate",
        artifact: p.annotations.clone(),
        summary: format!("{} passages: {summary}", out.len()),
    })
}

pub fn stats(cfg: &PipelineConfig, exec: Execution) -> Result<StageOutcome, PipelineError> {
    let p = &cfg.paths;
    require(&p.annotations, "run `forge annotate` first")?;
    let annotations: Vec<AnnotatedPassage> = read_records(&p.annotations)?;
    let table = stats::count_types(&annotations, exec);
    if table.is_empty() {
        log::warn!("no entity types in {}; bucket report is empty", p.annotations.display());
    }
    let file = StatsFile::from_table(&table);
    manifest::write_artifact(&p.stats, &pretty(&file), "stats", &json!({}), &[&p.annotations])?;
    let head = file
        .buckets
        .first()
        .map(|b| format!(", top 1% share {:.4}", b.share))
        .unwrap_or_default();
    Ok(StageOutcome {
        stage: "stats",
        artifact: p.stats.clone(),
        summary: format!("{} mentions over {} types{head}", file.total, file.distinct_types),
    })
}

pub fn build(cfg: &PipelineConfig, exec: Execution) -> Result<StageOutcome, PipelineError> {
    let p = &cfg.paths;
    let template = cfg.template()?;
    let strategy = cfg.negative_strategy()?;
    let settings = json!({
        "source": cfg.build.source,
        "template": cfg.build.template,
        "negatives": cfg.build.negatives,
        "neg_k": cfg.build.neg_k,
        "dataset_field": cfg.build.dataset_field,
        "seed": cfg.seed,
    });
    let mut inputs: Vec<&Path> = Vec::new();
    let needs_vocab = strategy != NegativeStrategy::None;
    let convs = match cfg.build.source {
        BuildSource::Annotations => {
            require(&p.annotations, "run `forge annotate` first")?;
            inputs.push(&p.annotations);
            let vocabulary = if needs_vocab {
                require(&p.stats, "negative sampling draws from the type table; run `forge stats` first")?;
                inputs.push(&p.stats);
                read_stats(&p.stats)?
            } else {
                TypeFrequencyTable::new()
            };
            let sampling = NegativeSampling {
                strategy,
                vocabulary,
                seed: cfg.seed,
            };
            let records: Vec<AnnotatedPassage> = read_records(&p.annotations)?;
            let skipped = records.iter().filter(|r| !r.is_ok()).count();
            if skipped > 0 {
                log::info!("skipping {skipped} malformed annotations");
            }
            conversation::build_conversations(&records, template, &sampling, cfg.build.dataset_field, exec)
                .map_err(|e| stage_err("build")(&e))?
        }
        BuildSource::Benchmark => {
            require(&p.benchmark, "run `forge process` first")?;
            inputs.push(&p.benchmark);
            // Frequency weights for supervised records come from the type
            // table when one exists; otherwise every candidate weighs 1.
            let vocabulary = if needs_vocab && p.stats.exists() {
                inputs.push(&p.stats);
                read_stats(&p.stats)?
            } else {
                TypeFrequencyTable::new()
            };
            let sampling = NegativeSampling {
                strategy,
                vocabulary,
                seed: cfg.seed,
            };
            let records: Vec<BenchmarkRecord> = read_records(&p.benchmark)?;
            conversation::build_supervised_conversations(&records, template, &sampling, cfg.build.dataset_field, exec)
                .map_err(|e| stage_err("build")(&e))?
        }
    };
    manifest::write_artifact(&p.conversations, model::to_jsonl_string(&convs).as_bytes(), "build", &settings, &inputs)?;
    Ok(StageOutcome {
        stage: "build",
        artifact: p.conversations.clone(),
        summary: format!("{} conversations", convs.len()),
    })
}

pub fn process(cfg: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let p = &cfg.paths;
    let s = &cfg.process;
    if s.dataset.trim().is_empty() || s.domain.trim().is_empty() {
        return Err(PipelineError::Config("process needs a dataset and a domain name".into()));
    }
    require(&p.raw_benchmark, "point paths.raw_benchmark or --input at the dataset file")?;
    require(&p.labelmap, "the label map lists every raw label of the dataset")?;
    let input_err = |path: &Path| {
        let path = path.display().to_string();
        move |e: benchmark::BenchmarkError| PipelineError::Input {
            path: path.clone(),
            message: e.to_string(),
        }
    };
    let data = read_text(&p.raw_benchmark)?;
    let raw = match s.format.as_str() {
        "conll" => benchmark::read_conll(&data, &s.dataset).map_err(input_err(&p.raw_benchmark))?,
        "spans" => {
            let docs = benchmark::read_span_documents(&data).map_err(input_err(&p.raw_benchmark))?;
            let split = benchmark::split_documents(&docs).map_err(input_err(&p.raw_benchmark))?;
            benchmark::normalize_text(split.into_records())
        }
        other => return Err(PipelineError::Config(format!("unknown format {other:?} (expected conll|spans)"))),
    };
    let map = LabelMap::from_json(&read_text(&p.labelmap)?).map_err(input_err(&p.labelmap))?;
    let records = benchmark::normalize_labels(&raw, &s.dataset, &s.domain, &map).map_err(input_err(&p.raw_benchmark))?;
    let capped = benchmark::cap_queries(&records, s.cap, cfg.seed);
    let settings = json!({"format": s.format, "dataset": s.dataset, "domain": s.domain, "cap": s.cap, "seed": cfg.seed});
    manifest::write_artifact(
        &p.benchmark,
        model::to_jsonl_string(&capped).as_bytes(),
        "process",
        &settings,
        &[&p.raw_benchmark, &p.labelmap],
    )?;
    let queries: usize = capped.iter().map(|r| r.allowed_types().len()).sum();
    Ok(StageOutcome {
        stage: "process",
        artifact: p.benchmark.clone(),
        summary: format!("{} of {} records kept, {queries} queries", capped.len(), records.len()),
    })
}

/// Scores predictions; the summary headlines strict or partial overall F1.
pub fn evaluate(cfg: &PipelineConfig, exec: Execution) -> Result<(StageOutcome, eval::EvalReport), PipelineError> {
    let p = &cfg.paths;
    require(&p.benchmark, "run `forge process` first")?;
    require(&p.predictions, "predictions are {record_id, entity_type, raw_output} lines")?;
    let bench: Vec<BenchmarkRecord> = read_records(&p.benchmark)?;
    let preds: Vec<RawPrediction> = read_records(&p.predictions)?;
    let report = eval::evaluate(&bench, &preds, exec).map_err(|e| PipelineError::Input {
        path: p.predictions.display().to_string(),
        message: e.to_string(),
    })?;
    manifest::write_artifact(
        &p.report,
        report.to_json().as_bytes(),
        "eval",
        &json!({}),
        &[&p.benchmark, &p.predictions],
    )?;
    let (label, f1) = if cfg.eval.partial {
        ("partial", report.overall.partial_f1)
    } else {
        ("strict", report.overall.strict_f1)
    };
    let outcome = StageOutcome {
        stage: "eval",
        artifact: p.report.clone(),
        summary: format!("{label} F1 {:.4} over {} datasets", f1.0, report.overall.datasets),
    };
    Ok((outcome, report))
}

/// Checks every manifest in `dir`; stale artifacts are an error.
pub fn verify(dir: &Path) -> Result<Vec<manifest::Freshness>, PipelineError> {
    let all = manifest::verify_dir(dir)?;
    let stale: Vec<String> = all
        .iter()
        .filter(|f| !f.is_fresh())
        .map(|f| format!("{} ({})", f.artifact, f.problems.join("; ")))
        .collect();
    if stale.is_empty() {
        Ok(all)
    } else {
        Err(PipelineError::Stale {
            count: stale.len(),
            details: stale.join(", "),
        })
    }
}
