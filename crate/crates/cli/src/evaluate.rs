//! `evaluate`: judge candidate texts with the configured ensemble, compare
//! against reference ratings, and report length-stratified scores.

use std::fs;
use std::io::BufRead;

use anyhow::{Context, Result};
use carepath_core::evaluation::{
    correlate_with_reference, judge_item, shuffle_items, stratify_by_length, summarize,
    CorrelationReports, EvalItem, EvaluationError, HttpJudge, JudgedItem, JudgeProvider,
    LengthBucket, ReferenceRatings, StratifyInput, StubJudge, SummaryStats, TaskKind,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{io_error, PipelineConfig};
use crate::ingest::write_json;
use crate::manifest::RunManifest;

/// Rubric handed to judges when no rubric file is configured. The four
/// dimensions are scored 1 (poor) to 5 (excellent).
pub const DEFAULT_RUBRIC: &str = "\
Score each dimension from 1 (poor) to 5 (excellent).

factual: agreement of stated facts with the source record. 5 = every
checkable statement is correct; 3 = minor inaccuracies that would not
change management; 1 = an error that could change management or endanger
the patient.

completeness: coverage of the clinically important content. 5 = nothing
material missing and key risks surfaced; 3 = core content present with
minor omissions; 1 = core content missing or misread.

soundness: safety and justification of the reasoning. 5 = conclusions
follow accepted practice and are well supported; 3 = reasonable overall
with weakly supported side points; 1 = any unsafe or clearly unjustified
conclusion.

actionability: usefulness of the proposed next steps. 5 = concrete,
prioritized, personalized actions; 3 = some usable advice but vague in
key places; 1 = no usable guidance for the current problem.
";

#[derive(Debug, Serialize)]
pub struct JudgedOutput {
    pub presentation_order: Vec<String>,
    pub items: Vec<JudgedItem>,
}

#[derive(Debug, Serialize)]
pub struct TaskStats {
    pub task: TaskKind,
    pub stats: SummaryStats,
}

#[derive(Debug, Serialize)]
pub struct StratifiedOutput {
    pub buckets: Vec<LengthBucket>,
    pub notice: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct EvaluateSummary {
    pub items: usize,
    pub per_task: Vec<TaskStats>,
    pub correlations: Option<CorrelationReports>,
    pub stratified: StratifiedOutput,
}

pub fn run(config: &PipelineConfig, manifest: &mut RunManifest) -> Result<EvaluateSummary> {
    let items_path = config.require("items", &config.items)?;
    manifest.record_input(&items_path)?;

    let file = fs::File::open(&items_path)
        .map_err(io_error(format!("opening items {}", items_path.display())))?;
    let mut items: Vec<EvalItem> = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_error("reading items"))?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(
            serde_json::from_str(&line)
                .with_context(|| format!("items line {}: malformed item", i + 1))?,
        );
    }

    let rubric = match &config.rubric {
        Some(path) => fs::read_to_string(path)
            .map_err(io_error(format!("reading rubric {}", path.display())))?,
        None => DEFAULT_RUBRIC.to_string(),
    };

    let judges: Vec<Box<dyn JudgeProvider>> = if config.stub_judges {
        (0..config.stub_judge_count)
            .map(|i| {
                let id = format!("judge-{}", i + 1);
                let judge = match config.stub_judge_fixed {
                    Some(v) => StubJudge::fixed(
                        id,
                        carepath_core::evaluation::RawScores {
                            factual: v,
                            completeness: v,
                            soundness: v,
                            actionability: v,
                        },
                    ),
                    None => StubJudge::seeded(id, config.seed.wrapping_add(i as u64 + 1)),
                };
                Box::new(judge) as Box<dyn JudgeProvider>
            })
            .collect()
    } else {
        let endpoints = std::env::var("JUDGE_ENDPOINTS").map_err(|_| {
            crate::config::ConfigError::MissingInput {
                role: "JUDGE_ENDPOINTS",
                path: "(environment)".into(),
            }
        })?;
        let tokens: Vec<String> = std::env::var("JUDGE_TOKENS")
            .map(|t| t.split(',').map(|s| s.trim().to_string()).collect())
            .unwrap_or_default();
        endpoints
            .split(',')
            .enumerate()
            .map(|(i, endpoint)| {
                let judge = HttpJudge::new(
                    format!("judge-{}", i + 1),
                    endpoint.trim().to_string(),
                    tokens.get(i).cloned().filter(|t| !t.is_empty()),
                )?;
                Ok(Box::new(judge) as Box<dyn JudgeProvider>)
            })
            .collect::<Result<Vec<_>, carepath_core::ProviderError>>()?
    };
    let judge_refs: Vec<&dyn JudgeProvider> = judges.iter().map(|j| j.as_ref()).collect();

    // items are judged in a seeded shuffled order
    let presentation = shuffle_items(items.clone(), config.seed);
    let presentation_order: Vec<String> =
        presentation.iter().map(|i| i.item_id.clone()).collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .context("building worker pool")?;
    let judged: Result<Vec<JudgedItem>, EvaluationError> = pool.install(|| {
        presentation
            .par_iter()
            .map(|item| judge_item(item, &judge_refs, &rubric))
            .collect()
    });
    let mut judged = judged?;
    judged.sort_by(|a, b| a.item_id.cmp(&b.item_id));
    for item in &judged {
        for warning in &item.warnings {
            manifest.warn(warning.clone());
        }
    }

    let eval_dir = config.out.join("evaluation");
    write_json(
        &eval_dir.join("judged.json"),
        &JudgedOutput {
            presentation_order,
            items: judged.clone(),
        },
    )?;

    let mut per_task = Vec::new();
    for task in [TaskKind::ClinicalSummary, TaskKind::ClinicalRecommendation] {
        let scores: Vec<f64> = judged
            .iter()
            .filter(|j| j.task == task)
            .map(|j| j.ensemble.overall)
            .collect();
        if !scores.is_empty() {
            per_task.push(TaskStats {
                task,
                stats: summarize(&scores)?,
            });
        }
    }

    let correlations = match &config.ratings {
        Some(path) if path.exists() => {
            manifest.record_input(path)?;
            let file = fs::File::open(path)
                .map_err(io_error(format!("opening ratings {}", path.display())))?;
            let reference = ReferenceRatings::from_reader(file)?;
            let reports = correlate_with_reference(&judged, &reference);
            for notice in &reports.skipped {
                manifest.warn(notice.clone());
            }
            write_json(&eval_dir.join("correlations.json"), &reports)?;
            Some(reports)
        }
        _ => None,
    };

    let strat_inputs: Vec<StratifyInput> = judged
        .iter()
        .map(|j| {
            let token_count = items
                .iter()
                .find(|i| i.item_id == j.item_id)
                .map(|i| i.token_count)
                .unwrap_or(0);
            StratifyInput {
                item_id: j.item_id.clone(),
                token_count,
                score: j.ensemble.overall,
            }
        })
        .collect();
    let stratified = match stratify_by_length(&strat_inputs) {
        Ok(buckets) => StratifiedOutput { buckets, notice: None },
        Err(EvaluationError::TooFewItems(n)) => {
            let notice = format!("stratification skipped: {n} items (need 3)");
            manifest.warn(notice.clone());
            StratifiedOutput { buckets: Vec::new(), notice: Some(notice) }
        }
        Err(e) => return Err(e.into()),
    };
    write_json(&eval_dir.join("stratified.json"), &stratified)?;

    let summary = EvaluateSummary {
        items: judged.len(),
        per_task,
        correlations,
        stratified,
    };
    let report = render_report(&summary);
    fs::write(eval_dir.join("report.txt"), &report).map_err(io_error("writing report"))?;
    print!("{report}");
    Ok(summary)
}

fn render_report(summary: &EvaluateSummary) -> String {
    let mut out = String::new();
    out.push_str(&format!("items judged: {}\n\n", summary.items));
    out.push_str(&format!(
        "{:<26} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7}\n",
        "task", "n", "mean", "std", "q1", "median", "q3"
    ));
    for task in &summary.per_task {
        let s = &task.stats;
        out.push_str(&format!(
            "{:<26} {:>6} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>7.3}\n",
            task.task.to_string(),
            s.n,
            s.mean,
            s.std,
            s.q1,
            s.median,
            s.q3
        ));
    }
    if let Some(correlations) = &summary.correlations {
        out.push_str("\nrank correlation vs reference raters:\n");
        for report in &correlations.reports {
            out.push_str(&format!(
                "  ({}, {}): rho = {:+.4} over n = {}\n",
                report.pairing.0, report.pairing.1, report.rho, report.n
            ));
        }
        for notice in &correlations.skipped {
            out.push_str(&format!("  {notice}\n"));
        }
    }
    out.push_str("\nlength-stratified ensemble scores:\n");
    if let Some(notice) = &summary.stratified.notice {
        out.push_str(&format!("  {notice}\n"));
    }
    if !summary.stratified.buckets.is_empty() {
        out.push_str(&format!(
            "  {:<8} {:>6} {:>12} {:>12} {:>18}\n",
            "bucket", "items", "mean_tokens", "mean_score", "token_range"
        ));
        for bucket in &summary.stratified.buckets {
            out.push_str(&format!(
                "  {:<8} {:>6} {:>12.1} {:>12.3} {:>8}-{}\n",
                format!("{:?}", bucket.label).to_lowercase(),
                bucket.item_ids.len(),
                bucket.mean_tokens,
                bucket.mean_score,
                bucket.token_range.0,
                bucket.token_range.1
            ));
        }
    }
    out
}
