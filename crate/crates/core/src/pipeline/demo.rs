//! The bundled end-to-end demo: a three-article corpus annotated by a mock
//! backend, and a six-sentence CoNLL dataset scored against canned
//! predictions.

use std::path::{Path, PathBuf};

use super::{manifest, PipelineConfig, PipelineError, StageOutcome};
use crate::eval::EvalReport;
use crate::exec::Execution;

pub const CONFIG: &str = include_str!("../../fixtures/demo/forge.toml");
pub const GOLDEN_REPORT: &str = include_str!("../../fixtures/demo/golden_report.json");

const INPUTS: &[(&str, &str)] = &[
    ("inputs/corpus/news.txt", include_str!("../../fixtures/demo/corpus/news.txt")),
    ("inputs/corpus/recipes.txt", include_str!("../../fixtures/demo/corpus/recipes.txt")),
    ("inputs/corpus/science.txt", include_str!("../../fixtures/demo/corpus/science.txt")),
    ("inputs/mock_responses.jsonl", include_str!("../../fixtures/demo/mock_responses.jsonl")),
    ("inputs/conll_toy.conll", include_str!("../../fixtures/demo/conll_toy.conll")),
    ("inputs/labelmap.json", include_str!("../../fixtures/demo/labelmap.json")),
    ("inputs/predictions.jsonl", include_str!("../../fixtures/demo/predictions.jsonl")),
    ("forge.toml", CONFIG),
];

pub struct DemoRun {
    pub config: PipelineConfig,
    pub outcomes: Vec<StageOutcome>,
    pub report: EvalReport,
}

impl DemoRun {
    /// Every artifact and manifest written, in stage order.
    pub fn artifacts(&self) -> Vec<PathBuf> {
        self.outcomes
            .iter()
            .flat_map(|o| [o.artifact.clone(), manifest::manifest_path(&o.artifact)])
            .collect()
    }
}

/// Writes the bundled inputs under `dir` and returns the demo config with
/// paths resolved against it.
pub fn install(dir: &Path) -> Result<PipelineConfig, PipelineError> {
    for (rel, text) in INPUTS {
        manifest::write_atomic(&dir.join(rel), text.as_bytes())?;
    }
    let mut cfg = PipelineConfig::from_toml(CONFIG)?;
    cfg.paths.rebase(dir);
    if let Some(mock) = cfg.annotate.endpoint.strip_prefix("mock:") {
        cfg.annotate.endpoint = format!("mock:{}", dir.join(mock).display());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs all six stages in `dir` and checks the report against the golden
/// copy.
pub fn run(dir: &Path, exec: Execution) -> Result<DemoRun, PipelineError> {
    let config = install(dir)?;
    let mut outcomes = vec![
        super::chunk(&config, exec)?,
        super::annotate(&config)?,
        super::stats(&config, exec)?,
        super::build(&config, exec)?,
        super::process(&config)?,
    ];
    let (eval, report) = super::evaluate(&config, exec)?;
    outcomes.push(eval);
    for o in &outcomes {
        log::info!("{}: {} -> {}", o.stage, o.summary, o.artifact.display());
    }
    if report.to_json() != GOLDEN_REPORT {
        return Err(PipelineError::GoldenMismatch {
            artifact: config.paths.report.display().to_string(),
        });
    }
    Ok(DemoRun {
        config,
        outcomes,
        report,
    })
}
