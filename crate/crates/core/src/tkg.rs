//! Patient-centric temporal knowledge graphs.
//!
//! Extracted clinical events become timestamped graph entities, lexically
//! linked to a biomedical concept catalog. Precise timestamps attach only at
//! encounter level; events inside an encounter are chained through relative
//! temporal relations, and consecutive encounters are bridged with a
//! before-edge. The time-ordered trajectory is recoverable from the graph.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ClinicalEvent, EventKind};

#[derive(Debug, Error)]
pub enum TkgError {
    #[error("events are not strictly ordered by (encounter_time, intra_order) at {0}")]
    UnorderedEvents(String),
    #[error("temporal knowledge graph is empty")]
    EmptyGraph,
    #[error("duplicate order key (encounter_time, intra_order) on entities {0} and {1}")]
    DuplicateOrderKey(String, String),
    #[error("catalog validation failed: {0}")]
    CatalogInvalid(String),
    #[error("malformed graph dump: {0}")]
    Dump(#[from] serde_json::Error),
}

/// One standardized concept in the biomedical catalog.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
    pub category: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConceptRelation {
    pub src: String,
    pub dst: String,
    pub rel: String,
}

/// Static biomedical concept catalog (a subset export of a real ontology).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConceptCatalog {
    pub concepts: Vec<Concept>,
    #[serde(default)]
    pub relations: Vec<ConceptRelation>,
}

impl ConceptCatalog {
    pub fn from_json_str(json: &str) -> Result<Self, TkgError> {
        let catalog: ConceptCatalog = serde_json::from_str(json)?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn validate(&self) -> Result<(), TkgError> {
        let mut ids = BTreeSet::new();
        for concept in &self.concepts {
            if !ids.insert(concept.id.as_str()) {
                return Err(TkgError::CatalogInvalid(format!(
                    "duplicate concept id {:?}",
                    concept.id
                )));
            }
        }
        for rel in &self.relations {
            for end in [&rel.src, &rel.dst] {
                if !ids.contains(end.as_str()) {
                    return Err(TkgError::CatalogInvalid(format!(
                        "relation {:?} -> {:?} references unknown concept {:?}",
                        rel.src, rel.dst, end
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Concept> {
        self.concepts.iter().find(|c| c.id == id)
    }
}

/// Casefold and collapse internal whitespace.
fn normalize(s: &str) -> String {
    s.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Link a textual mention to a catalog concept.
///
/// Matching rule: exact normalized match on the canonical name or any
/// synonym wins first; otherwise the concept whose longest alias (by char
/// count) appears as a substring of the normalized mention wins. Ties break
/// to the lowest concept id. No match is a valid `None`.
pub fn link_entity(mention: &str, catalog: &ConceptCatalog) -> Option<String> {
    let mention = normalize(mention);
    if mention.is_empty() {
        return None;
    }
    let aliases = |c: &Concept| -> Vec<String> {
        std::iter::once(normalize(&c.name))
            .chain(c.synonyms.iter().map(|s| normalize(s)))
            .filter(|a| !a.is_empty())
            .collect()
    };

    let mut exact: Option<&str> = None;
    for concept in &catalog.concepts {
        if aliases(concept).contains(&mention) {
            exact = match exact {
                Some(prev) if prev <= concept.id.as_str() => Some(prev),
                _ => Some(&concept.id),
            };
        }
    }
    if let Some(id) = exact {
        return Some(id.to_string());
    }

    let mut best: Option<(usize, &str)> = None;
    for concept in &catalog.concepts {
        for alias in aliases(concept) {
            if mention.contains(&alias) {
                let len = alias.chars().count();
                best = match best {
                    Some((blen, bid)) if (blen, std::cmp::Reverse(bid)) >= (len, std::cmp::Reverse(concept.id.as_str())) => {
                        Some((blen, bid))
                    }
                    _ => Some((len, &concept.id)),
                };
            }
        }
    }
    best.map(|(_, id)| id.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalKind {
    /// Edge anchored to an encounter-level timestamp.
    Precise,
    /// Source encounter precedes destination encounter.
    RelativeBefore,
    /// Both endpoints share one encounter.
    RelativeSameEncounter,
}

/// A timestamped entity in the patient graph, linked to the catalog when a
/// concept matched. Unlinked entities stay in the graph so alignment can
/// still match on their descriptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TkgEntity {
    pub entity_id: String,
    pub concept_id: Option<String>,
    pub timestamp: DateTime<Utc>,
    pub intra_order: u32,
    pub kind: EventKind,
    pub description: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    pub source_event_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TkgRelation {
    pub src_entity: String,
    pub dst_entity: String,
    pub rel_label: String,
    pub temporal_kind: TemporalKind,
}

/// Patient temporal knowledge graph: entities, relations, and the set of
/// encounter-level timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalKG {
    pub patient_id: String,
    pub entities: Vec<TkgEntity>,
    pub relations: Vec<TkgRelation>,
    pub timestamps: Vec<DateTime<Utc>>,
}

impl TemporalKG {
    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Entities that could not be linked to any catalog concept.
    pub fn unlinked_count(&self) -> usize {
        self.entities.iter().filter(|e| e.concept_id.is_none()).count()
    }

    pub fn to_json_string(&self) -> Result<String, TkgError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(json: &str) -> Result<Self, TkgError> {
        Ok(serde_json::from_str(json)?)
    }
}

/// The time-ordered sequence of a patient's clinical events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub patient_id: String,
    pub events: Vec<ClinicalEvent>,
}

impl Trajectory {
    pub fn descriptions(&self) -> Vec<&str> {
        self.events.iter().map(|e| e.description.as_str()).collect()
    }
}

/// Instantiate the patient graph from an ordered event sequence.
///
/// One entity per event; adjacent events in one encounter are chained with
/// `relative_same_encounter` edges and the last event of an encounter links
/// to the first event of the next with a `relative_before` edge. Precise
/// timestamps are recorded per encounter only.
pub fn instantiate_tkg(
    patient_id: &str,
    events: &[ClinicalEvent],
    catalog: &ConceptCatalog,
) -> Result<TemporalKG, TkgError> {
    for pair in events.windows(2) {
        let a = (pair[0].encounter_time, pair[0].intra_order);
        let b = (pair[1].encounter_time, pair[1].intra_order);
        if a >= b {
            return Err(TkgError::UnorderedEvents(format!(
                "{} then {}",
                pair[0].event_id, pair[1].event_id
            )));
        }
    }

    let entities: Vec<TkgEntity> = events
        .iter()
        .enumerate()
        .map(|(i, event)| TkgEntity {
            entity_id: format!("ent-{i:04}"),
            concept_id: link_entity(&event.description, catalog),
            timestamp: event.encounter_time,
            intra_order: event.intra_order,
            kind: event.kind,
            description: event.description.clone(),
            attributes: event.attributes.clone(),
            source_event_id: event.event_id.clone(),
        })
        .collect();

    let mut relations = Vec::new();
    for i in 1..entities.len() {
        let prev = &entities[i - 1];
        let next = &entities[i];
        let (kind, label) = if prev.timestamp == next.timestamp {
            (TemporalKind::RelativeSameEncounter, "same_encounter")
        } else {
            (TemporalKind::RelativeBefore, "before")
        };
        relations.push(TkgRelation {
            src_entity: prev.entity_id.clone(),
            dst_entity: next.entity_id.clone(),
            rel_label: label.to_string(),
            temporal_kind: kind,
        });
    }

    let timestamps: Vec<DateTime<Utc>> = {
        let set: BTreeSet<DateTime<Utc>> = entities.iter().map(|e| e.timestamp).collect();
        set.into_iter().collect()
    };

    Ok(TemporalKG {
        patient_id: patient_id.to_string(),
        entities,
        relations,
        timestamps,
    })
}

/// Reconstruct the time-ordered trajectory from a graph, regardless of
/// entity storage order.
pub fn extract_trajectory(tkg: &TemporalKG) -> Result<Trajectory, TkgError> {
    if tkg.is_empty() {
        return Err(TkgError::EmptyGraph);
    }
    let mut sorted: Vec<&TkgEntity> = tkg.entities.iter().collect();
    sorted.sort_by_key(|e| (e.timestamp, e.intra_order));
    for pair in sorted.windows(2) {
        if (pair[0].timestamp, pair[0].intra_order) == (pair[1].timestamp, pair[1].intra_order) {
            return Err(TkgError::DuplicateOrderKey(
                pair[0].entity_id.clone(),
                pair[1].entity_id.clone(),
            ));
        }
    }
    let events = sorted
        .into_iter()
        .map(|e| ClinicalEvent {
            event_id: e.source_event_id.clone(),
            description: e.description.clone(),
            kind: e.kind,
            encounter_time: e.timestamp,
            intra_order: e.intra_order,
            attributes: e.attributes.clone(),
        })
        .collect();
    Ok(Trajectory {
        patient_id: tkg.patient_id.clone(),
        events,
    })
}
