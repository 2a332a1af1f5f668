//! Rendering of the evidence-grounded context handed to a downstream
//! generation model.
//!
//! Templates are plain text with `{{slot}}` placeholders. Three slots are
//! required: `trajectory`, `matched_path`, and `evidence`; `patient_id` and
//! `best_score` are optional extras. Rendering is deterministic.

use super::{AlignmentError, FusedGraph, ScoredPath};
use crate::corpus::text::token_count;
use crate::tkg::Trajectory;

pub const REQUIRED_SLOTS: [&str; 3] = ["trajectory", "matched_path", "evidence"];

/// Default template; mirrors the usual prompt layout of longitudinal
/// records, the matched normative workflow, retrieved evidence, and the
/// sections a downstream model is asked to fill in.
pub const DEFAULT_TEMPLATE: &str = "\
# Patient context for {{patient_id}}

## Longitudinal clinical events
{{trajectory}}

## Matched guideline path (score {{best_score}})
{{matched_path}}

## Evidence alignments
{{evidence}}

## Clinical summary
(to be generated)

## Clinical recommendation
(to be generated)
";

#[derive(Debug, Clone)]
pub struct ContextTemplate {
    text: String,
}

impl ContextTemplate {
    /// Validate that all required slots are present.
    pub fn new(text: impl Into<String>) -> Result<Self, AlignmentError> {
        let text = text.into();
        let missing: Vec<String> = REQUIRED_SLOTS
            .iter()
            .filter(|slot| !text.contains(&format!("{{{{{slot}}}}}")))
            .map(|s| s.to_string())
            .collect();
        if missing.is_empty() {
            Ok(Self { text })
        } else {
            Err(AlignmentError::MissingSlots(missing))
        }
    }
}

impl Default for ContextTemplate {
    fn default() -> Self {
        Self::new(DEFAULT_TEMPLATE).expect("default template has all slots")
    }
}

#[derive(Debug, Clone)]
pub struct RenderedContext {
    pub text: String,
    pub token_count: usize,
}

/// Assemble the context text: chronologically ordered events, the matched
/// guideline path with step descriptions, and one line per evidence edge.
pub fn render_context(
    fused: &FusedGraph,
    trajectory: &Trajectory,
    best: &ScoredPath,
    template: &ContextTemplate,
) -> Result<RenderedContext, AlignmentError> {
    let trajectory_lines: Vec<String> = trajectory
        .events
        .iter()
        .map(|e| {
            format!(
                "- [{}] ({}) {}",
                e.encounter_time.format("%Y-%m-%d"),
                e.kind,
                e.description
            )
        })
        .collect();

    let path_lines: Vec<String> = best
        .path
        .steps
        .iter()
        .enumerate()
        .map(|(i, step_id)| {
            let desc = fused.step_desc(step_id).unwrap_or("(unknown step)");
            format!("{}. {} — {}", i + 1, step_id, desc)
        })
        .collect();

    let evidence_lines: Vec<String> = fused
        .evidence_edges
        .iter()
        .map(|e| {
            format!(
                "- step {} {} entity {} (weight {:.4})",
                e.step_id, e.label, e.entity_id, e.weight
            )
        })
        .collect();

    let text = template
        .text
        .replace("{{patient_id}}", &trajectory.patient_id)
        .replace("{{best_score}}", &format!("{:.4}", best.score))
        .replace("{{trajectory}}", &trajectory_lines.join("\n"))
        .replace("{{matched_path}}", &path_lines.join("\n"))
        .replace("{{evidence}}", &evidence_lines.join("\n"));

    let tokens = token_count(&text, "en");
    Ok(RenderedContext {
        text,
        token_count: tokens,
    })
}
