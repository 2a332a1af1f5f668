//! carepath: turn longitudinal clinical documents into temporal knowledge
//! graphs, align patient trajectories with guideline paths, render
//! evidence-grounded contexts, and evaluate generated text with a judge
//! ensemble.
//!
//! Exit codes: 0 success, 2 configuration, 3 input parsing, 4 provider,
//! 5 validation, 1 anything else.

mod align;
mod config;
mod evaluate;
mod fixtures;
mod ingest;
mod manifest;

use std::path::PathBuf;

use anyhow::Result;
use carepath_core::alignment::AlignmentError;
use carepath_core::corpus::CorpusError;
use carepath_core::embedding::{EmbedderKind, EmbeddingError};
use carepath_core::evaluation::EvaluationError;
use carepath_core::guideline::GuidelineError;
use carepath_core::tkg::TkgError;
use carepath_core::ProviderError;
use clap::{Args, Parser, Subcommand};

use config::{ConfigError, PipelineConfig};
use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "carepath", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default, Clone)]
struct Overrides {
    /// Configuration file (flat key = value lines)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for all randomness (shuffling, hash embedder)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Confidence threshold for seeding and expansion
    #[arg(long, global = true)]
    theta: Option<f64>,
    /// Semantic-vs-neighborhood weight in expansion
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Maximum bootstrapping iterations
    #[arg(long, global = true)]
    iterations: Option<usize>,
    /// Candidates kept for reranking
    #[arg(long = "top-n", global = true)]
    top_n: Option<usize>,
    /// Embedding provider
    #[arg(long, global = true, value_parser = ["hash", "remote"])]
    embedder: Option<String>,
    /// Use deterministic stub judges
    #[arg(long = "stub-judges", global = true)]
    stub_judges: bool,
    /// Use the identity stub reranker
    #[arg(long = "stub-reranker", global = true)]
    stub_reranker: bool,
    /// Worker pool size
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    /// Write per-patient event dumps
    #[arg(long = "dump-events", global = true)]
    dump_events: bool,
    /// Write per-patient temporal graph dumps
    #[arg(long = "dump-tkg", global = true)]
    dump_tkg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the corpus and emit per-patient events and temporal graphs
    Ingest(Overrides),
    /// Align patient trajectories with guideline paths (needs ingest artifacts)
    Align(Overrides),
    /// Judge evaluation items and report correlations and strata
    Evaluate(Overrides),
    /// Ingest, align, and evaluate in one run
    RunAll(Overrides),
    /// Write the bundled synthetic fixtures and a ready-to-run config
    GenFixtures {
        /// Directory to write fixtures into
        #[arg(long, default_value = "fixtures")]
        out: PathBuf,
        /// Generator seed
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn load_config(overrides: &Overrides) -> Result<PipelineConfig> {
    let mut config = match &overrides.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(out) = &overrides.out {
        config.out = out.clone();
    }
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(theta) = overrides.theta {
        config.theta = theta;
    }
    if let Some(alpha) = overrides.alpha {
        config.alpha = alpha;
    }
    if let Some(iterations) = overrides.iterations {
        config.iterations = iterations;
    }
    if let Some(top_n) = overrides.top_n {
        config.top_n = top_n;
    }
    if let Some(embedder) = &overrides.embedder {
        config.embedder = match embedder.as_str() {
            "remote" => EmbedderKind::Remote,
            _ => EmbedderKind::Hash,
        };
    }
    if overrides.stub_judges {
        config.stub_judges = true;
    }
    if overrides.stub_reranker {
        config.stub_reranker = true;
    }
    if let Some(parallelism) = overrides.parallelism {
        config.parallelism = parallelism;
    }
    if overrides.dump_events {
        config.dump_events = true;
    }
    if overrides.dump_tkg {
        config.dump_tkg = true;
    }
    config.validate()?;
    std::fs::create_dir_all(&config.out).map_err(config::io_error("creating output dir"))?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(overrides) => {
            let config = load_config(&overrides)?;
            let mut manifest = RunManifest::new(&config);
            let summary = manifest.time_stage("ingest", |m| ingest::run(&config, m))?;
            manifest.write(&config.out)?;
            println!(
                "ingest: {} patients, {} documents, {} events ({} unlinked entities)",
                summary.patients, summary.documents, summary.events, summary.unlinked_entities
            );
            Ok(())
        }
        Command::Align(overrides) => {
            let config = load_config(&overrides)?;
            let mut manifest = RunManifest::new(&config);
            let summary = manifest.time_stage("align", |m| align::run(&config, m))?;
            manifest.write(&config.out)?;
            println!(
                "align: {} patients aligned over {} candidate paths",
                summary.patients, summary.paths_enumerated
            );
            Ok(())
        }
        Command::Evaluate(overrides) => {
            let config = load_config(&overrides)?;
            let mut manifest = RunManifest::new(&config);
            let summary = manifest.time_stage("evaluate", |m| evaluate::run(&config, m))?;
            manifest.write(&config.out)?;
            println!("evaluate: {} items judged", summary.items);
            Ok(())
        }
        Command::RunAll(overrides) => {
            let config = load_config(&overrides)?;
            let mut manifest = RunManifest::new(&config);
            manifest.time_stage("ingest", |m| ingest::run(&config, m))?;
            manifest.time_stage("align", |m| align::run(&config, m))?;
            manifest.time_stage("evaluate", |m| evaluate::run(&config, m))?;
            manifest.write(&config.out)?;
            println!("run-all complete; artifacts under {}", config.out.display());
            Ok(())
        }
        Command::GenFixtures { out, seed } => fixtures::run(&out, seed),
    }
}

fn exit_code(error: &anyhow::Error) -> i32 {
    for cause in error.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<CorpusError>() {
            return match e {
                CorpusError::Parse { .. } | CorpusError::Field { .. } => 3,
                CorpusError::Provider(_) => 4,
                CorpusError::Io(_) => 2,
                _ => 5,
            };
        }
        if let Some(e) = cause.downcast_ref::<GuidelineError>() {
            return match e {
                GuidelineError::Parse(_) => 3,
                GuidelineError::Io(_) => 2,
                _ => 5,
            };
        }
        if let Some(e) = cause.downcast_ref::<TkgError>() {
            return match e {
                TkgError::Dump(_) => 3,
                _ => 5,
            };
        }
        if let Some(e) = cause.downcast_ref::<EmbeddingError>() {
            return match e {
                EmbeddingError::Provider { .. } | EmbeddingError::Protocol(_) => 4,
                EmbeddingError::InvalidConfig(_) => 2,
                _ => 5,
            };
        }
        if let Some(e) = cause.downcast_ref::<AlignmentError>() {
            return match e {
                AlignmentError::Provider(_) => 4,
                AlignmentError::Embedding(EmbeddingError::Provider { .. })
                | AlignmentError::Embedding(EmbeddingError::Protocol(_)) => 4,
                AlignmentError::InvalidConfig(_) => 2,
                _ => 5,
            };
        }
        if let Some(e) = cause.downcast_ref::<EvaluationError>() {
            return match e {
                EvaluationError::AllJudgesFailed { .. } | EvaluationError::NoJudges => 4,
                EvaluationError::Reference(_) => 3,
                EvaluationError::Io(_) => 2,
                _ => 5,
            };
        }
        if cause.is::<ProviderError>() {
            return 4;
        }
        if cause.is::<std::io::Error>() {
            return 2;
        }
    }
    1
}

fn main() {
    let cli = Cli::parse();
    if let Err(error) = run(cli) {
        eprintln!("error: {error:#}");
        std::process::exit(exit_code(&error));
    }
}
