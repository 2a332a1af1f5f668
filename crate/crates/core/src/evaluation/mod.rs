//! Judged-text evaluation harness: rubric scoring through a judge
//! ensemble with seeded presentation shuffling, ensemble aggregation,
//! Spearman correlation against reference raters, and length-stratified
//! reporting.

pub mod judge;
pub mod stats;

pub use judge::{HttpJudge, JudgeProvider, RawScores, StubJudge};
pub use stats::{average_ranks, spearman, summarize, StatsError, SummaryStats};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("no judges configured")]
    NoJudges,
    #[error("all judges failed or were excluded for item {item_id}")]
    AllJudgesFailed { item_id: String },
    #[error("stratification needs at least 3 items, got {0}")]
    TooFewItems(usize),
    #[error("malformed reference ratings: {0}")]
    Reference(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    ClinicalSummary,
    ClinicalRecommendation,
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TaskKind::ClinicalSummary => "clinical_summary",
            TaskKind::ClinicalRecommendation => "clinical_recommendation",
        })
    }
}

/// One item to be judged.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalItem {
    pub item_id: String,
    pub task: TaskKind,
    pub prompt_context: String,
    pub candidate_text: String,
    pub token_count: usize,
}

/// Validated per-dimension rubric scores, each in 1..=5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricScore {
    pub factual_accuracy: u8,
    pub completeness: u8,
    pub clinical_soundness: u8,
    pub actionability: u8,
}

impl RubricScore {
    pub fn from_raw(raw: &RawScores) -> Option<Self> {
        let check = |v: i64| -> Option<u8> {
            if (1..=5).contains(&v) {
                Some(v as u8)
            } else {
                None
            }
        };
        Some(Self {
            factual_accuracy: check(raw.factual)?,
            completeness: check(raw.completeness)?,
            clinical_soundness: check(raw.soundness)?,
            actionability: check(raw.actionability)?,
        })
    }

    pub fn dims(&self) -> [u8; 4] {
        [
            self.factual_accuracy,
            self.completeness,
            self.clinical_soundness,
            self.actionability,
        ]
    }

    /// Mean of the four dimensions.
    pub fn overall(&self) -> f64 {
        self.dims().iter().map(|&v| v as f64).sum::<f64>() / 4.0
    }
}

/// Ensemble means per dimension plus the overall mean of the four.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleScore {
    pub factual_accuracy: f64,
    pub completeness: f64,
    pub clinical_soundness: f64,
    pub actionability: f64,
    pub overall: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgedItem {
    pub item_id: String,
    pub task: TaskKind,
    /// Accepted judges only, keyed by judge id.
    pub per_judge: BTreeMap<String, RubricScore>,
    pub ensemble: EnsembleScore,
    pub warnings: Vec<String>,
}

/// Deterministic presentation shuffle; the same seed always yields the
/// same permutation.
pub fn shuffle_items<T>(mut items: Vec<T>, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    items.shuffle(&mut rng);
    items
}

/// Collect rubric scores from every judge, excluding judges whose reply is
/// out of range or who fail (with a warning each). The ensemble is the
/// arithmetic mean over accepted judges; iteration over the id-keyed map
/// makes the result independent of judge order.
pub fn judge_item(
    item: &EvalItem,
    judges: &[&dyn JudgeProvider],
    rubric: &str,
) -> Result<JudgedItem, EvaluationError> {
    if judges.is_empty() {
        return Err(EvaluationError::NoJudges);
    }
    let mut per_judge: BTreeMap<String, RubricScore> = BTreeMap::new();
    let mut warnings = Vec::new();
    for judge in judges {
        match judge.judge(rubric, item) {
            Ok(raw) => match RubricScore::from_raw(&raw) {
                Some(score) => {
                    per_judge.insert(judge.id().to_string(), score);
                }
                None => warnings.push(format!(
                    "judge {} excluded: out-of-range reply {:?} for item {}",
                    judge.id(),
                    (raw.factual, raw.completeness, raw.soundness, raw.actionability),
                    item.item_id
                )),
            },
            Err(e) => warnings.push(format!(
                "judge {} excluded: {e} (item {})",
                judge.id(),
                item.item_id
            )),
        }
    }
    if per_judge.is_empty() {
        return Err(EvaluationError::AllJudgesFailed {
            item_id: item.item_id.clone(),
        });
    }
    let n = per_judge.len() as f64;
    let mut sums = [0.0f64; 4];
    for score in per_judge.values() {
        for (slot, v) in sums.iter_mut().zip(score.dims()) {
            *slot += v as f64;
        }
    }
    let means = sums.map(|s| s / n);
    let ensemble = EnsembleScore {
        factual_accuracy: means[0],
        completeness: means[1],
        clinical_soundness: means[2],
        actionability: means[3],
        overall: (means[0] + means[1] + means[2] + means[3]) / 4.0,
    };
    Ok(JudgedItem {
        item_id: item.item_id.clone(),
        task: item.task,
        per_judge,
        ensemble,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Reference ratings and correlation
// ---------------------------------------------------------------------------

/// Reference ratings parsed from CSV
/// (`item_id,rater_id,factual,completeness,soundness,actionability`).
#[derive(Debug, Clone, Default)]
pub struct ReferenceRatings {
    /// rater id -> item id -> score
    pub by_rater: BTreeMap<String, BTreeMap<String, RubricScore>>,
}

impl ReferenceRatings {
    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self, EvaluationError> {
        let mut csv_reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = csv_reader
            .headers()
            .map_err(|e| EvaluationError::Reference(e.to_string()))?
            .clone();
        let expected = ["item_id", "rater_id", "factual", "completeness", "soundness", "actionability"];
        let got: Vec<&str> = headers.iter().collect();
        if got != expected {
            return Err(EvaluationError::Reference(format!(
                "expected header {expected:?}, got {got:?}"
            )));
        }
        let mut by_rater: BTreeMap<String, BTreeMap<String, RubricScore>> = BTreeMap::new();
        for (i, record) in csv_reader.records().enumerate() {
            let record = record.map_err(|e| EvaluationError::Reference(e.to_string()))?;
            let field = |idx: usize| -> Result<i64, EvaluationError> {
                record[idx].parse().map_err(|_| {
                    EvaluationError::Reference(format!(
                        "row {}: {:?} is not an integer",
                        i + 2,
                        &record[idx]
                    ))
                })
            };
            let raw = RawScores {
                factual: field(2)?,
                completeness: field(3)?,
                soundness: field(4)?,
                actionability: field(5)?,
            };
            let score = RubricScore::from_raw(&raw).ok_or_else(|| {
                EvaluationError::Reference(format!("row {}: score out of 1..=5", i + 2))
            })?;
            by_rater
                .entry(record[1].to_string())
                .or_default()
                .insert(record[0].to_string(), score);
        }
        Ok(Self { by_rater })
    }

    /// Mean overall score across raters, per item.
    pub fn mean_overall(&self) -> BTreeMap<String, f64> {
        let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for ratings in self.by_rater.values() {
            for (item, score) in ratings {
                let entry = sums.entry(item.clone()).or_insert((0.0, 0));
                entry.0 += score.overall();
                entry.1 += 1;
            }
        }
        sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }
}

pub const REFERENCE_MEAN_RATER: &str = "reference_mean";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub n: usize,
    pub rho: f64,
    pub pairing: (String, String),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CorrelationReports {
    pub reports: Vec<CorrelationReport>,
    /// Pairings skipped with the reason (too few overlapping items,
    /// undefined correlation).
    pub skipped: Vec<String>,
}

/// Correlate the ensemble overall scores with each reference rater and
/// with the across-rater mean. Pairings with fewer than 3 overlapping
/// items are skipped with a notice; reports are emitted however low the
/// correlation is.
pub fn correlate_with_reference(
    judged: &[JudgedItem],
    reference: &ReferenceRatings,
) -> CorrelationReports {
    let ensemble: BTreeMap<&str, f64> = judged
        .iter()
        .map(|j| (j.item_id.as_str(), j.ensemble.overall))
        .collect();
    let mut out = CorrelationReports::default();

    let mut pairings: Vec<(String, BTreeMap<String, f64>)> = reference
        .by_rater
        .iter()
        .map(|(rater, ratings)| {
            (
                rater.clone(),
                ratings.iter().map(|(item, s)| (item.clone(), s.overall())).collect(),
            )
        })
        .collect();
    pairings.push((REFERENCE_MEAN_RATER.to_string(), reference.mean_overall()));

    for (rater, ratings) in pairings {
        let overlap: Vec<(&str, f64, f64)> = ratings
            .iter()
            .filter_map(|(item, &y)| {
                ensemble.get(item.as_str()).map(|&x| (item.as_str(), x, y))
            })
            .collect();
        if overlap.len() < 3 {
            out.skipped.push(format!(
                "pairing (llm_ensemble, {rater}) skipped: {} overlapping items (need 3)",
                overlap.len()
            ));
            continue;
        }
        let x: Vec<f64> = overlap.iter().map(|(_, x, _)| *x).collect();
        let y: Vec<f64> = overlap.iter().map(|(_, _, y)| *y).collect();
        match spearman(&x, &y) {
            Ok(rho) => out.reports.push(CorrelationReport {
                n: overlap.len(),
                rho,
                pairing: ("llm_ensemble".to_string(), rater),
            }),
            Err(StatsError::UndefinedCorrelation) => out.skipped.push(format!(
                "pairing (llm_ensemble, {rater}) skipped: zero rank variance"
            )),
            Err(e) => out.skipped.push(format!(
                "pairing (llm_ensemble, {rater}) skipped: {e}"
            )),
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Length stratification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BucketLabel {
    Short,
    Medium,
    Long,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LengthBucket {
    pub label: BucketLabel,
    pub token_range: (usize, usize),
    pub item_ids: Vec<String>,
    pub mean_tokens: f64,
    pub mean_score: f64,
}

/// Input row for stratification.
#[derive(Debug, Clone)]
pub struct StratifyInput {
    pub item_id: String,
    pub token_count: usize,
    pub score: f64,
}

/// Percentile thirds by token count: sort ascending (ties by item id) and
/// split at floor(n/3) and floor(2n/3). Bucket sizes differ by at most 1.
pub fn stratify_by_length(items: &[StratifyInput]) -> Result<Vec<LengthBucket>, EvaluationError> {
    if items.len() < 3 {
        return Err(EvaluationError::TooFewItems(items.len()));
    }
    let mut sorted: Vec<&StratifyInput> = items.iter().collect();
    sorted.sort_by(|a, b| (a.token_count, &a.item_id).cmp(&(b.token_count, &b.item_id)));
    let n = sorted.len();
    let cut1 = n / 3;
    let cut2 = 2 * n / 3;
    let slices = [
        (BucketLabel::Short, &sorted[..cut1]),
        (BucketLabel::Medium, &sorted[cut1..cut2]),
        (BucketLabel::Long, &sorted[cut2..]),
    ];
    Ok(slices
        .into_iter()
        .map(|(label, slice)| {
            let mean_tokens =
                slice.iter().map(|i| i.token_count as f64).sum::<f64>() / slice.len() as f64;
            let mean_score = slice.iter().map(|i| i.score).sum::<f64>() / slice.len() as f64;
            LengthBucket {
                label,
                token_range: (
                    slice.first().map(|i| i.token_count).unwrap_or(0),
                    slice.last().map(|i| i.token_count).unwrap_or(0),
                ),
                item_ids: slice.iter().map(|i| i.item_id.clone()).collect(),
                mean_tokens,
                mean_score,
            }
        })
        .collect())
}
