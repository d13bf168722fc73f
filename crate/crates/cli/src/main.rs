//! `forge`: the pipeline stages as subcommands.
//!
//! Settings come from defaults, then the `--config` TOML file, then flags.
//! On failure a single JSON line `{"error": KIND, "message": ..., "path"?: ...}`
//! goes to stderr and the exit status is 1.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nerforge::pipeline::config::apply;
use nerforge::pipeline::{self, demo, BuildSource, PipelineConfig, PipelineError};
use nerforge::Execution;

#[derive(Parser, Debug)]
#[command(name = "forge", version, about = "Open-domain NER distillation data and evaluation pipeline")]
struct Cli {
    /// TOML settings file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for every sampled stage.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, value_name = "LEVEL")]
    log_level: Option<String>,
    /// Run per-record work on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Chunk a corpus into passages and sample them.
    Chunk(ChunkArgs),
    /// Annotate passages with a chat model (or a mock).
    Annotate(AnnotateArgs),
    /// Count entity types and write the bucket report.
    Stats(StatsArgs),
    /// Render conversation-style tuning examples.
    Build(BuildArgs),
    /// Convert a labeled dataset into benchmark records.
    Process(ProcessArgs),
    /// Score predictions against a benchmark.
    Eval(EvalArgs),
    /// Run every stage on the bundled fixtures and check the golden report.
    Demo(DemoArgs),
    /// Check artifact manifests for stale inputs.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct ChunkArgs {
    /// Directory of .txt files or JSONL of {source, text} articles.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    max_tokens: Option<usize>,
    /// Number of passages to sample.
    #[arg(long = "sample")]
    sample_size: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnnotateArgs {
    #[arg(long)]
    passages: Option<PathBuf>,
    /// type or definition.
    #[arg(long)]
    variant: Option<String>,
    /// http(s) chat endpoint, or mock:FILE for canned responses.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Maximum requests in flight.
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    retries: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BuildArgs {
    /// Build from model annotations.
    #[arg(long, conflicts_with = "benchmark")]
    annotations: Option<PathBuf>,
    /// Build from supervised benchmark records.
    #[arg(long)]
    benchmark: Option<PathBuf>,
    /// per-type, all-in-one or definition.
    #[arg(long)]
    variant: Option<String>,
    /// none, uniform or frequency.
    #[arg(long)]
    neg: Option<String>,
    #[arg(long)]
    neg_k: Option<usize>,
    /// Type table for negative sampling.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Prefix each text with its dataset name.
    #[arg(long)]
    dataset_field: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProcessArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// conll or spans.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    labelmap: Option<PathBuf>,
    /// Maximum passage-query pairs kept.
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    benchmark: Option<PathBuf>,
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Headline partial-match F1 instead of strict.
    #[arg(long)]
    partial: bool,
}

#[derive(Args, Debug)]
struct DemoArgs {
    /// Working directory for inputs and artifacts.
    #[arg(long, default_value = "forge-demo")]
    dir: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Directory holding artifacts and their manifests.
    #[arg(default_value = ".")]
    dir: PathBuf,
}

fn init_logging(level: &str) -> Result<(), PipelineError> {
    let filter: log::LevelFilter = level
        .parse()
        .map_err(|_| PipelineError::Config(format!("unknown log level {level:?}")))?;
    env_logger::Builder::new()
        .filter_level(filter)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    Ok(())
}

/// Raises `flag` to `Some(true)` only when the switch was given.
fn switch(on: bool) -> Option<bool> {
    on.then_some(true)
}

fn apply_stage_flags(cfg: &mut PipelineConfig, command: &Command) {
    let p = &mut cfg.paths;
    match command {
        Command::Chunk(a) => {
            apply(&mut p.corpus, a.input.clone(), "input");
            apply(&mut p.passages, a.out.clone(), "out");
            apply(&mut cfg.chunk.max_tokens, a.max_tokens, "max-tokens");
            apply(&mut cfg.chunk.sample_size, a.sample_size, "sample");
        }
        Command::Annotate(a) => {
            apply(&mut p.passages, a.passages.clone(), "passages");
            apply(&mut p.annotations, a.out.clone(), "out");
            let s = &mut cfg.annotate;
            apply(&mut s.variant, a.variant.clone(), "variant");
            apply(&mut s.endpoint, a.endpoint.clone(), "endpoint");
            apply(&mut s.model, a.model.clone(), "model");
            apply(&mut s.concurrency, a.concurrency, "concurrency");
            apply(&mut s.retry_limit, a.retries, "retries");
        }
        Command::Stats(a) => {
            apply(&mut p.annotations, a.annotations.clone(), "annotations");
            apply(&mut p.stats, a.out.clone(), "out");
        }
        Command::Build(a) => {
            if a.annotations.is_some() {
                apply(&mut cfg.build.source, Some(BuildSource::Annotations), "annotations");
            }
            if a.benchmark.is_some() {
                apply(&mut cfg.build.source, Some(BuildSource::Benchmark), "benchmark");
            }
            apply(&mut p.annotations, a.annotations.clone(), "annotations");
            apply(&mut p.benchmark, a.benchmark.clone(), "benchmark");
            apply(&mut p.stats, a.stats.clone(), "stats");
            apply(&mut p.conversations, a.out.clone(), "out");
            let b = &mut cfg.build;
            apply(&mut b.template, a.variant.clone(), "variant");
            apply(&mut b.negatives, a.neg.clone(), "neg");
            apply(&mut b.neg_k, a.neg_k, "neg-k");
            apply(&mut b.dataset_field, switch(a.dataset_field), "dataset-field");
        }
        Command::Process(a) => {
            apply(&mut p.raw_benchmark, a.input.clone(), "input");
            apply(&mut p.labelmap, a.labelmap.clone(), "labelmap");
            apply(&mut p.benchmark, a.out.clone(), "out");
            let s = &mut cfg.process;
            apply(&mut s.format, a.format.clone(), "format");
            apply(&mut s.dataset, a.dataset.clone(), "dataset");
            apply(&mut s.domain, a.domain.clone(), "domain");
            apply(&mut s.cap, a.cap, "cap");
        }
        Command::Eval(a) => {
            apply(&mut p.benchmark, a.benchmark.clone(), "benchmark");
            apply(&mut p.predictions, a.predictions.clone(), "predictions");
            apply(&mut p.report, a.out.clone(), "out");
            apply(&mut cfg.eval.partial, switch(a.partial), "partial");
        }
        Command::Demo(_) | Command::Verify(_) => {}
    }
}

fn print_outcome(o: &pipeline::StageOutcome) {
    println!("{}: {} -> {}", o.stage, o.summary, o.artifact.display());
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let level = cli.log_level.clone().unwrap_or_else(|| cfg.log_level.clone());
    init_logging(&level)?;
    apply(&mut cfg.log_level, cli.log_level.clone(), "log-level");
    apply(&mut cfg.seed, cli.seed, "seed");
    apply_stage_flags(&mut cfg, &cli.command);
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };

    match &cli.command {
        Command::Demo(a) => return run_demo(&a.dir, exec),
        Command::Verify(a) => return run_verify(&a.dir),
        _ => {}
    }
    cfg.validate()?;
    let outcome = match &cli.command {
        Command::Chunk(_) => pipeline::chunk(&cfg, exec)?,
        Command::Annotate(_) => pipeline::annotate(&cfg)?,
        Command::Stats(_) => pipeline::stats(&cfg, exec)?,
        Command::Build(_) => pipeline::build(&cfg, exec)?,
        Command::Process(_) => pipeline::process(&cfg)?,
        Command::Eval(_) => pipeline::evaluate(&cfg, exec)?.0,
        Command::Demo(_) | Command::Verify(_) => unreachable!("handled above"),
    };
    print_outcome(&outcome);
    Ok(())
}

fn run_demo(dir: &Path, exec: Execution) -> Result<(), PipelineError> {
    let run = demo::run(dir, exec)?;
    for o in &run.outcomes {
        print_outcome(o);
    }
    println!("report matches the golden copy");
    Ok(())
}

fn run_verify(dir: &Path) -> Result<(), PipelineError> {
    let all = pipeline::verify(dir)?;
    if all.is_empty() {
        log::warn!("no manifests in {}", dir.display());
    }
    for f in all {
        println!("ok {}", f.artifact);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::FAILURE
        }
    }
}
