//! `align`: per-patient trajectory alignment against the guideline graph,
//! consuming the ingest artifacts only. Emits one alignment report and one
//! rendered context per patient plus a run summary table.

use std::fs;
use std::sync::Arc;

use anyhow::{Context, Result};
use carepath_core::alignment::{
    expand_alignment, merge_graphs, rank_paths, render_context, rerank, seed_pairs,
    AlignmentPair, ContextTemplate, FusedGraph, HttpReranker, RerankerProvider, ScoredPath,
    StubReranker,
};
use carepath_core::embedding::Embedder;
use carepath_core::guideline::{enumerate_paths, GuidelineKG};
use carepath_core::tkg::{extract_trajectory, TemporalKG};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{io_error, ConfigError, PipelineConfig};
use crate::ingest::write_json;
use crate::manifest::RunManifest;

#[derive(Debug, Serialize)]
struct BestPathReport {
    path_id: String,
    steps: Vec<String>,
    score: f64,
}

#[derive(Debug, Serialize)]
struct CandidateReport {
    path_id: String,
    score: f64,
}

#[derive(Debug, Serialize)]
struct AlignmentReport {
    patient_id: String,
    best_path: BestPathReport,
    candidates: Vec<CandidateReport>,
    seed_pairs: Vec<AlignmentPair>,
    final_pairs: Vec<AlignmentPair>,
    iterations_used: usize,
    fused_graph: FusedGraph,
}

#[derive(Debug, Serialize)]
pub struct PatientAlign {
    pub patient_id: String,
    pub best_path_id: String,
    pub best_score: f64,
    pub iterations_used: usize,
    pub seed_pairs: usize,
    pub final_pairs: usize,
    pub unlinked_entities: usize,
    pub context_tokens: usize,
}

#[derive(Debug, Serialize)]
pub struct AlignSummary {
    pub patients: usize,
    pub skipped: Vec<String>,
    pub paths_enumerated: usize,
    pub paths_truncated: bool,
    pub per_patient: Vec<PatientAlign>,
}

struct PatientArtifacts {
    report_json: String,
    context_text: String,
    row: PatientAlign,
    warning: Option<String>,
}

pub fn run(config: &PipelineConfig, manifest: &mut RunManifest) -> Result<AlignSummary> {
    let guideline_path = config.require("guideline", &config.guideline)?;
    manifest.record_input(&guideline_path)?;
    let guideline = GuidelineKG::from_path(&guideline_path)?;
    let enumeration = enumerate_paths(&guideline, config.max_depth, config.max_paths)?;
    if enumeration.truncated {
        manifest.warn(format!(
            "path enumeration truncated at {} paths",
            config.max_paths
        ));
    }

    let template = match &config.template {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(io_error(format!("reading template {}", path.display())))?;
            ContextTemplate::new(text)?
        }
        None => ContextTemplate::default(),
    };

    let embedder: Arc<dyn Embedder> = config.embedding_config().build()?;
    let reranker: Box<dyn RerankerProvider> = if config.stub_reranker {
        Box::new(StubReranker)
    } else {
        let endpoint = std::env::var("RERANK_ENDPOINT").map_err(|_| ConfigError::MissingInput {
            role: "RERANK_ENDPOINT",
            path: "(environment)".into(),
        })?;
        Box::new(HttpReranker::new(endpoint, std::env::var("RERANK_TOKEN").ok())?)
    };
    let bootstrap = config.bootstrap_config();

    let tkg_dir = config.out.join("tkg");
    if !tkg_dir.is_dir() {
        return Err(ConfigError::MissingInput {
            role: "tkg artifacts (run ingest first)",
            path: tkg_dir.display().to_string(),
        }
        .into());
    }
    let mut tkg_files: Vec<_> = fs::read_dir(&tkg_dir)
        .map_err(io_error("listing tkg dir"))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    tkg_files.sort();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .context("building worker pool")?;
    let artifacts: Result<Vec<PatientArtifacts>> = pool.install(|| {
        tkg_files
            .par_iter()
            .map(|path| {
                let json = fs::read_to_string(path)
                    .map_err(io_error(format!("reading {}", path.display())))?;
                let tkg = TemporalKG::from_json_str(&json)?;
                align_patient(
                    &tkg,
                    &guideline,
                    &enumeration.paths,
                    embedder.as_ref(),
                    reranker.as_ref(),
                    &bootstrap,
                    &template,
                )
            })
            .collect()
    });
    let artifacts = artifacts?;

    let align_dir = config.out.join("alignments");
    let context_dir = config.out.join("contexts");
    fs::create_dir_all(&align_dir).map_err(io_error("creating alignments dir"))?;
    fs::create_dir_all(&context_dir).map_err(io_error("creating contexts dir"))?;

    let mut per_patient = Vec::new();
    let mut skipped = Vec::new();
    for artifact in artifacts {
        let pid = artifact.row.patient_id.clone();
        if let Some(warning) = artifact.warning {
            manifest.warn(format!("{pid}: {warning}"));
            if artifact.report_json.is_empty() {
                skipped.push(pid);
                continue;
            }
        }
        fs::write(align_dir.join(format!("{pid}.json")), &artifact.report_json)
            .map_err(io_error(format!("writing alignment for {pid}")))?;
        fs::write(context_dir.join(format!("{pid}.txt")), &artifact.context_text)
            .map_err(io_error(format!("writing context for {pid}")))?;
        per_patient.push(artifact.row);
    }

    let summary = AlignSummary {
        patients: per_patient.len(),
        skipped,
        paths_enumerated: enumeration.paths.len(),
        paths_truncated: enumeration.truncated,
        per_patient,
    };
    write_json(&config.out.join("align_summary.json"), &summary)?;
    print_table(&summary);
    Ok(summary)
}

#[allow(clippy::too_many_arguments)]
fn align_patient(
    tkg: &TemporalKG,
    guideline: &GuidelineKG,
    paths: &[carepath_core::guideline::GuidelinePath],
    embedder: &dyn Embedder,
    reranker: &dyn RerankerProvider,
    bootstrap: &carepath_core::alignment::BootstrapConfig,
    template: &ContextTemplate,
) -> Result<PatientArtifacts> {
    let pid = tkg.patient_id.clone();
    if tkg.is_empty() {
        return Ok(PatientArtifacts {
            report_json: String::new(),
            context_text: String::new(),
            row: PatientAlign {
                patient_id: pid,
                best_path_id: String::new(),
                best_score: 0.0,
                iterations_used: 0,
                seed_pairs: 0,
                final_pairs: 0,
                unlinked_entities: 0,
                context_tokens: 0,
            },
            warning: Some("no events in temporal graph; skipped".into()),
        });
    }
    let trajectory = extract_trajectory(tkg)?;
    let ranked = rank_paths(&trajectory, paths, guideline, embedder, bootstrap.top_n)
        .with_context(|| format!("ranking paths for {pid}"))?;
    let outcome = rerank(&trajectory, &ranked, reranker)?;
    let best: &ScoredPath = &outcome.ranked[0];
    let seeds = seed_pairs(best, bootstrap.theta);
    let expansion = expand_alignment(
        &trajectory,
        &best.path,
        guideline,
        &seeds,
        bootstrap,
        embedder,
    )?;
    let fused = merge_graphs(guideline, tkg, &expansion.final_set)?;
    let rendered = render_context(&fused, &trajectory, best, template)?;

    let row = PatientAlign {
        patient_id: pid.clone(),
        best_path_id: best.path.path_id.clone(),
        best_score: best.score,
        iterations_used: expansion.iterations_used,
        seed_pairs: seeds.len(),
        final_pairs: expansion.final_set.len(),
        unlinked_entities: tkg.unlinked_count(),
        context_tokens: rendered.token_count,
    };
    let report = AlignmentReport {
        patient_id: pid,
        best_path: BestPathReport {
            path_id: best.path.path_id.clone(),
            steps: best.path.steps.clone(),
            score: best.score,
        },
        candidates: outcome
            .ranked
            .iter()
            .map(|sp| CandidateReport {
                path_id: sp.path.path_id.clone(),
                score: sp.score,
            })
            .collect(),
        seed_pairs: seeds.pairs().to_vec(),
        final_pairs: expansion.final_set.pairs().to_vec(),
        iterations_used: expansion.iterations_used,
        fused_graph: fused,
    };
    Ok(PatientArtifacts {
        report_json: serde_json::to_string_pretty(&report)?,
        context_text: rendered.text,
        row,
        warning: outcome.warning,
    })
}

fn print_table(summary: &AlignSummary) {
    println!(
        "{:<10} {:>10} {:>9} {:>6} {:>6} {:>6} {:>9}",
        "patient", "best_path", "score", "iters", "seeds", "pairs", "unlinked"
    );
    for row in &summary.per_patient {
        println!(
            "{:<10} {:>10} {:>9.4} {:>6} {:>6} {:>6} {:>9}",
            row.patient_id,
            row.best_path_id,
            row.best_score,
            row.iterations_used,
            row.seed_pairs,
            row.final_pairs,
            row.unlinked_entities
        );
    }
    for pid in &summary.skipped {
        println!("{pid:<10} (skipped: empty graph)");
    }
}
