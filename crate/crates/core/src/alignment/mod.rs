//! Trajectory / guideline-path alignment.
//!
//! A candidate path is scored by summing, per guideline step, the best
//! cosine similarity between that step's description and any event in the
//! patient trajectory. The top-scored candidates are reranked by a clinical
//! reasoner provider, high-confidence (event, step) pairs seed the
//! alignment set, and a bootstrapping loop expands it: each unaligned event
//! picks the step maximizing a weighted blend of direct semantic similarity
//! and consistency with the already-aligned pairs. The final set fuses the
//! guideline graph and the patient graph through weighted evidence edges.

mod context;
mod fuse;
mod rerank;

pub use context::{render_context, ContextTemplate, RenderedContext, DEFAULT_TEMPLATE};
pub use fuse::{merge_graphs, EvidenceEdge, FusedGraph, EVIDENCE_LABEL};
pub use rerank::{
    rerank, HttpReranker, RerankCandidate, RerankOutcome, RerankRequest, RerankerProvider,
    StubReranker,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine_sim, Embedder, EmbeddingError, EmbeddingVector};
use crate::guideline::{GuidelineKG, GuidelinePath};
use crate::provider::ProviderError;
use crate::tkg::Trajectory;

#[derive(Debug, Error)]
pub enum AlignmentError {
    #[error("trajectory has no events")]
    EmptyTrajectory,
    #[error("guideline path has no steps")]
    EmptyPath,
    #[error("no candidate paths to rank")]
    NoCandidates,
    #[error("unknown guideline step {0:?}")]
    UnknownStep(String),
    #[error("invalid bootstrap config: {0}")]
    InvalidConfig(String),
    #[error("alignment pair ({event_id:?}, {step_id:?}) has a dangling endpoint: {message}")]
    DanglingPair {
        event_id: String,
        step_id: String,
        message: String,
    },
    #[error("context template is missing slots: {}", .0.join(", "))]
    MissingSlots(Vec<String>),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Best-matching event for one step of a scored path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerStepBest {
    pub step_index: usize,
    pub best_event_id: String,
    pub best_sim: f64,
}

/// A guideline path scored against a trajectory; `score` is the sum of the
/// per-step best similarities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPath {
    pub path: GuidelinePath,
    pub score: f64,
    pub per_step_best: Vec<PerStepBest>,
}

/// One aligned (event, step) pair with its confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentPair {
    pub event_id: String,
    pub step_id: String,
    pub confidence: f64,
}

/// A set of alignment pairs in which each event appears at most once.
/// Pairs are kept sorted by event id for deterministic serialization.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSet {
    pairs: Vec<AlignmentPair>,
}

impl AlignmentSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a pair; replaces any existing pair for the same event.
    pub fn insert(&mut self, pair: AlignmentPair) {
        match self.pairs.binary_search_by(|p| p.event_id.cmp(&pair.event_id)) {
            Ok(i) => self.pairs[i] = pair,
            Err(i) => self.pairs.insert(i, pair),
        }
    }

    pub fn pairs(&self) -> &[AlignmentPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains_event(&self, event_id: &str) -> bool {
        self.pairs
            .binary_search_by(|p| p.event_id.as_str().cmp(event_id))
            .is_ok()
    }

    pub fn aligned_events(&self) -> Vec<&str> {
        self.pairs.iter().map(|p| p.event_id.as_str()).collect()
    }

    pub fn aligned_steps(&self) -> Vec<&str> {
        let mut steps: Vec<&str> = self.pairs.iter().map(|p| p.step_id.as_str()).collect();
        steps.sort_unstable();
        steps.dedup();
        steps
    }
}

/// Knobs for the bootstrapping expansion loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Weight of direct semantic similarity vs. neighborhood consistency.
    pub alpha: f64,
    /// Confidence threshold for seeding and expansion.
    pub theta: f64,
    pub max_iterations: usize,
    /// Candidates kept for reranking.
    pub top_n: usize,
    /// Candidate steps considered during expansion.
    pub scope: ExpansionScope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionScope {
    /// Search only the steps of the best-ranked path.
    BestPath,
    /// Search every guideline node.
    WholeGraph,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            theta: crate::embedding::DEFAULT_SIMILARITY_THRESHOLD,
            max_iterations: 10,
            top_n: 5,
            scope: ExpansionScope::BestPath,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<(), AlignmentError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(AlignmentError::InvalidConfig("alpha must be in [0, 1]".into()));
        }
        if !self.theta.is_finite() {
            return Err(AlignmentError::InvalidConfig("theta must be finite".into()));
        }
        if self.max_iterations == 0 {
            return Err(AlignmentError::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if self.top_n == 0 {
            return Err(AlignmentError::InvalidConfig("top_n must be >= 1".into()));
        }
        Ok(())
    }
}

fn step_descs<'a>(
    path: &'a GuidelinePath,
    graph: &'a GuidelineKG,
) -> Result<Vec<&'a str>, AlignmentError> {
    path.steps
        .iter()
        .map(|id| {
            graph
                .desc(id)
                .ok_or_else(|| AlignmentError::UnknownStep(id.clone()))
        })
        .collect()
}

/// Score one candidate path against a trajectory.
///
/// For each step, the best event is the one with maximal cosine similarity
/// between descriptions; ties go to the earliest event in trajectory order.
/// One event may be best for several steps.
pub fn score_path(
    trajectory: &Trajectory,
    path: &GuidelinePath,
    graph: &GuidelineKG,
    embedder: &dyn Embedder,
) -> Result<ScoredPath, AlignmentError> {
    if trajectory.events.is_empty() {
        return Err(AlignmentError::EmptyTrajectory);
    }
    if path.steps.is_empty() {
        return Err(AlignmentError::EmptyPath);
    }
    let step_texts = step_descs(path, graph)?;
    let event_texts = trajectory.descriptions();
    let step_vecs = embedder.embed(&step_texts)?;
    let event_vecs = embedder.embed(&event_texts)?;

    let mut per_step_best = Vec::with_capacity(path.steps.len());
    let mut score = 0.0f64;
    for (step_index, step_vec) in step_vecs.iter().enumerate() {
        let mut best_sim = f64::NEG_INFINITY;
        let mut best_event = 0usize;
        for (i, event_vec) in event_vecs.iter().enumerate() {
            let sim = cosine_sim(step_vec, event_vec)?;
            if sim > best_sim {
                best_sim = sim;
                best_event = i;
            }
        }
        score += best_sim;
        per_step_best.push(PerStepBest {
            step_index,
            best_event_id: trajectory.events[best_event].event_id.clone(),
            best_sim,
        });
    }
    Ok(ScoredPath {
        path: path.clone(),
        score,
        per_step_best,
    })
}

/// Score and rank candidate paths, descending; ties keep enumeration order.
/// Truncated to `top_n`; element 0 is the best match.
pub fn rank_paths(
    trajectory: &Trajectory,
    paths: &[GuidelinePath],
    graph: &GuidelineKG,
    embedder: &dyn Embedder,
    top_n: usize,
) -> Result<Vec<ScoredPath>, AlignmentError> {
    if paths.is_empty() {
        return Err(AlignmentError::NoCandidates);
    }
    if top_n == 0 {
        return Err(AlignmentError::InvalidConfig("top_n must be >= 1".into()));
    }
    let mut scored = paths
        .iter()
        .map(|p| score_path(trajectory, p, graph, embedder))
        .collect::<Result<Vec<_>, _>>()?;
    // stable sort keeps enumeration order on ties
    scored.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal));
    scored.truncate(top_n);
    Ok(scored)
}

/// Seed the alignment set from the best-ranked path: one pair per step
/// whose best similarity clears `theta`. An event that is best for several
/// steps keeps only its highest-similarity pair (earliest step on ties),
/// which enforces the one-step-per-event invariant.
pub fn seed_pairs(best: &ScoredPath, theta: f64) -> AlignmentSet {
    let mut by_event: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for psb in &best.per_step_best {
        if psb.best_sim >= theta {
            let entry = by_event.entry(psb.best_event_id.as_str());
            match entry {
                std::collections::btree_map::Entry::Vacant(v) => {
                    v.insert((psb.step_index, psb.best_sim));
                }
                std::collections::btree_map::Entry::Occupied(mut o) => {
                    if psb.best_sim > o.get().1 {
                        o.insert((psb.step_index, psb.best_sim));
                    }
                }
            }
        }
    }
    let mut set = AlignmentSet::new();
    for (event_id, (step_index, sim)) in by_event {
        set.insert(AlignmentPair {
            event_id: event_id.to_string(),
            step_id: best.path.steps[step_index].clone(),
            confidence: sim,
        });
    }
    set
}

/// Description lookup for alignment pairs, built from the trajectory and
/// the guideline graph.
pub struct DescLookup<'a> {
    events: BTreeMap<&'a str, &'a str>,
    steps: BTreeMap<&'a str, &'a str>,
}

impl<'a> DescLookup<'a> {
    pub fn new(trajectory: &'a Trajectory, graph: &'a GuidelineKG) -> Self {
        Self {
            events: trajectory
                .events
                .iter()
                .map(|e| (e.event_id.as_str(), e.description.as_str()))
                .collect(),
            steps: graph
                .nodes
                .iter()
                .map(|n| (n.id.as_str(), n.desc.as_str()))
                .collect(),
        }
    }
}

/// Consistency of a candidate (event, step) pair with the current
/// alignment set: the mean over aligned pairs of the averaged event-side
/// and step-side cosine similarities. An empty set scores 0.
pub fn neighborhood_score(
    candidate: (&str, &str),
    current: &AlignmentSet,
    lookup: &DescLookup,
    embedder: &dyn Embedder,
) -> Result<f64, AlignmentError> {
    if current.is_empty() {
        return Ok(0.0);
    }
    let (event_desc, step_desc) = candidate;
    let cand_event = embedder.embed_one(event_desc)?;
    let cand_step = embedder.embed_one(step_desc)?;
    let mut sum = 0.0f64;
    for pair in current.pairs() {
        let seed_event_desc = lookup.events.get(pair.event_id.as_str()).ok_or_else(|| {
            AlignmentError::DanglingPair {
                event_id: pair.event_id.clone(),
                step_id: pair.step_id.clone(),
                message: "event not in trajectory".into(),
            }
        })?;
        let seed_step_desc = lookup.steps.get(pair.step_id.as_str()).ok_or_else(|| {
            AlignmentError::DanglingPair {
                event_id: pair.event_id.clone(),
                step_id: pair.step_id.clone(),
                message: "step not in guideline".into(),
            }
        })?;
        let seed_event = embedder.embed_one(seed_event_desc)?;
        let seed_step = embedder.embed_one(seed_step_desc)?;
        sum += pair_consistency(
            &cand_event,
            &cand_step,
            &seed_event,
            &seed_step,
        )?;
    }
    Ok(sum / current.len() as f64)
}

/// Consistency between two pairs: the average of the event-side and
/// step-side cosine similarities.
fn pair_consistency(
    cand_event: &EmbeddingVector,
    cand_step: &EmbeddingVector,
    seed_event: &EmbeddingVector,
    seed_step: &EmbeddingVector,
) -> Result<f64, EmbeddingError> {
    Ok(0.5 * (cosine_sim(cand_event, seed_event)? + cosine_sim(cand_step, seed_step)?))
}

/// Result of the bootstrapping expansion loop.
#[derive(Debug, Clone)]
pub struct Expansion {
    pub final_set: AlignmentSet,
    /// Loop iterations executed (including a final empty one, if any).
    pub iterations_used: usize,
    /// New pairs added per productive iteration.
    pub added_per_iteration: Vec<usize>,
}

/// Iteratively expand the seed alignment set.
///
/// Per iteration, every still-unaligned event is scored against each
/// candidate step with `alpha * semantic + (1 - alpha) * neighborhood`;
/// the event aligns to the step maximizing the weighted score among those
/// strictly exceeding `theta` (ties to the earliest step index). All new
/// pairs of an iteration are committed together; the loop stops when an
/// iteration adds nothing or after `max_iterations`. Aligned events are
/// never re-aligned, so the result always contains the seed set.
pub fn expand_alignment(
    trajectory: &Trajectory,
    best_path: &GuidelinePath,
    graph: &GuidelineKG,
    seed: &AlignmentSet,
    config: &BootstrapConfig,
    embedder: &dyn Embedder,
) -> Result<Expansion, AlignmentError> {
    config.validate()?;
    if trajectory.events.is_empty() {
        return Err(AlignmentError::EmptyTrajectory);
    }

    let candidate_steps: Vec<&str> = match config.scope {
        ExpansionScope::BestPath => best_path.steps.iter().map(String::as_str).collect(),
        ExpansionScope::WholeGraph => {
            let mut ids: Vec<&str> = graph.nodes.iter().map(|n| n.id.as_str()).collect();
            ids.sort_unstable();
            ids
        }
    };
    if candidate_steps.is_empty() {
        return Err(AlignmentError::EmptyPath);
    }

    // embed everything once up front
    let step_texts: Vec<&str> = candidate_steps
        .iter()
        .map(|id| {
            graph
                .desc(id)
                .ok_or_else(|| AlignmentError::UnknownStep(id.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let step_vecs = embedder.embed(&step_texts)?;
    let event_texts = trajectory.descriptions();
    let event_vecs = embedder.embed(&event_texts)?;
    let event_vec_by_id: BTreeMap<&str, &EmbeddingVector> = trajectory
        .events
        .iter()
        .zip(&event_vecs)
        .map(|(e, v)| (e.event_id.as_str(), v))
        .collect();
    let step_vec_by_id: BTreeMap<&str, &EmbeddingVector> = candidate_steps
        .iter()
        .zip(&step_vecs)
        .map(|(id, v)| (*id, v))
        .collect();
    // seed steps may lie outside the candidate scope; embed them too
    let lookup = DescLookup::new(trajectory, graph);
    let mut extra_step_vecs: BTreeMap<&str, EmbeddingVector> = BTreeMap::new();
    for pair in seed.pairs() {
        if !step_vec_by_id.contains_key(pair.step_id.as_str()) {
            let desc = lookup.steps.get(pair.step_id.as_str()).ok_or_else(|| {
                AlignmentError::DanglingPair {
                    event_id: pair.event_id.clone(),
                    step_id: pair.step_id.clone(),
                    message: "step not in guideline".into(),
                }
            })?;
            extra_step_vecs.insert(pair.step_id.as_str(), embedder.embed_one(desc)?);
        }
        if !event_vec_by_id.contains_key(pair.event_id.as_str()) {
            return Err(AlignmentError::DanglingPair {
                event_id: pair.event_id.clone(),
                step_id: pair.step_id.clone(),
                message: "event not in trajectory".into(),
            });
        }
    }
    let step_vec = |id: &str| -> &EmbeddingVector {
        step_vec_by_id
            .get(id)
            .copied()
            .unwrap_or_else(|| &extra_step_vecs[id])
    };

    let mut final_set = seed.clone();
    let mut unaligned: Vec<&str> = trajectory
        .events
        .iter()
        .map(|e| e.event_id.as_str())
        .filter(|id| !final_set.contains_event(id))
        .collect();

    let mut iterations_used = 0usize;
    let mut added_per_iteration = Vec::new();
    for _ in 0..config.max_iterations {
        if unaligned.is_empty() {
            break;
        }
        iterations_used += 1;

        // neighborhood terms are computed against the set as of the start
        // of the iteration; new pairs are committed together below
        let snapshot: Vec<(&EmbeddingVector, &EmbeddingVector)> = final_set
            .pairs()
            .iter()
            .map(|p| (event_vec_by_id[p.event_id.as_str()], step_vec(&p.step_id)))
            .collect();

        let mut new_pairs: Vec<AlignmentPair> = Vec::new();
        for event_id in &unaligned {
            let event_vec = event_vec_by_id[event_id];
            let mut best: Option<(f64, usize)> = None;
            for (v, step_id) in candidate_steps.iter().enumerate() {
                let semantic = cosine_sim(event_vec, step_vec(step_id))?;
                let hood = if snapshot.is_empty() {
                    0.0
                } else {
                    let mut sum = 0.0f64;
                    for (seed_event, seed_step) in &snapshot {
                        sum += pair_consistency(
                            event_vec,
                            step_vec(step_id),
                            seed_event,
                            seed_step,
                        )?;
                    }
                    sum / snapshot.len() as f64
                };
                let weighted = config.alpha * semantic + (1.0 - config.alpha) * hood;
                if weighted > config.theta && best.map_or(true, |(w, _)| weighted > w) {
                    best = Some((weighted, v));
                }
            }
            if let Some((weighted, v)) = best {
                new_pairs.push(AlignmentPair {
                    event_id: event_id.to_string(),
                    step_id: candidate_steps[v].to_string(),
                    confidence: weighted,
                });
            }
        }

        if new_pairs.is_empty() {
            break;
        }
        added_per_iteration.push(new_pairs.len());
        for pair in &new_pairs {
            final_set.insert(pair.clone());
        }
        unaligned.retain(|id| !final_set.contains_event(id));
    }

    Ok(Expansion {
        final_set,
        iterations_used,
        added_per_iteration,
    })
}

#[cfg(test)]
mod tests;
