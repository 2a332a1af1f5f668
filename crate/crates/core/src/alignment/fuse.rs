//! Fusion of the guideline graph and the patient graph.
//!
//! The fused graph is the node-disjoint union of both graphs plus one
//! weighted evidence edge per alignment pair, connecting a guideline step
//! to the patient entity that realizes it. Original edges are preserved
//! verbatim; all collections serialize in a fixed sorted order.

use serde::{Deserialize, Serialize};

use super::{AlignmentError, AlignmentSet};
use crate::guideline::{GuidelineEdge, GuidelineKG, GuidelineNode};
use crate::tkg::{TemporalKG, TkgEntity, TkgRelation};

pub const EVIDENCE_LABEL: &str = "evidenced_by";

/// Weighted link from a guideline step to the patient entity evidencing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceEdge {
    pub step_id: String,
    pub entity_id: String,
    pub label: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FusedGraph {
    pub guideline_nodes: Vec<GuidelineNode>,
    pub entity_nodes: Vec<TkgEntity>,
    pub guideline_edges: Vec<GuidelineEdge>,
    pub tkg_edges: Vec<TkgRelation>,
    pub evidence_edges: Vec<EvidenceEdge>,
}

impl FusedGraph {
    pub fn node_count(&self) -> usize {
        self.guideline_nodes.len() + self.entity_nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.guideline_edges.len() + self.tkg_edges.len() + self.evidence_edges.len()
    }

    /// Step description lookup within the fused graph.
    pub fn step_desc(&self, id: &str) -> Option<&str> {
        self.guideline_nodes
            .iter()
            .find(|n| n.id == id)
            .map(|n| n.desc.as_str())
    }
}

/// Merge the guideline graph and a patient graph using the final alignment
/// set. Each pair's event id must resolve to a patient entity and its step
/// id to a guideline node, otherwise the offending pair is named in the
/// error.
pub fn merge_graphs(
    guideline: &GuidelineKG,
    tkg: &TemporalKG,
    alignments: &AlignmentSet,
) -> Result<FusedGraph, AlignmentError> {
    let mut evidence_edges = Vec::with_capacity(alignments.len());
    for pair in alignments.pairs() {
        let entity = tkg
            .entities
            .iter()
            .find(|e| e.source_event_id == pair.event_id)
            .ok_or_else(|| AlignmentError::DanglingPair {
                event_id: pair.event_id.clone(),
                step_id: pair.step_id.clone(),
                message: "no patient entity for event".into(),
            })?;
        if guideline.node(&pair.step_id).is_none() {
            return Err(AlignmentError::DanglingPair {
                event_id: pair.event_id.clone(),
                step_id: pair.step_id.clone(),
                message: "step not in guideline".into(),
            });
        }
        evidence_edges.push(EvidenceEdge {
            step_id: pair.step_id.clone(),
            entity_id: entity.entity_id.clone(),
            label: EVIDENCE_LABEL.to_string(),
            weight: pair.confidence,
        });
    }

    let mut guideline_nodes = guideline.nodes.clone();
    guideline_nodes.sort_by(|a, b| a.id.cmp(&b.id));
    let mut entity_nodes = tkg.entities.clone();
    entity_nodes.sort_by(|a, b| a.entity_id.cmp(&b.entity_id));
    let mut guideline_edges = guideline.edges.clone();
    guideline_edges.sort_by(|a, b| (&a.src, &a.dst, &a.rel).cmp(&(&b.src, &b.dst, &b.rel)));
    let mut tkg_edges = tkg.relations.clone();
    tkg_edges.sort_by(|a, b| {
        (&a.src_entity, &a.dst_entity, &a.rel_label).cmp(&(&b.src_entity, &b.dst_entity, &b.rel_label))
    });
    evidence_edges.sort_by(|a, b| (&a.step_id, &a.entity_id).cmp(&(&b.step_id, &b.entity_id)));

    Ok(FusedGraph {
        guideline_nodes,
        entity_nodes,
        guideline_edges,
        tkg_edges,
        evidence_edges,
    })
}
