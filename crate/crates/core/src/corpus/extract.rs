//! Clinical event extraction from condensed history text.
//!
//! The built-in extractor is a configurable keyword lexicon: each sentence
//! that contains a keyword yields one event of the keyword's kind, carrying
//! the encounter timestamp of the section the sentence came from. An
//! LLM-backed extractor can be swapped in through [`EventExtractorProvider`].

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::summarize::CondensedHistory;
use super::text::split_sentences;
use super::CorpusError;
use crate::provider::ProviderError;

/// Clinical event categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Diagnosis,
    Staging,
    Treatment,
    Biomarker,
    Imaging,
    Other,
}

impl EventKind {
    pub const ALL: [EventKind; 6] = [
        EventKind::Diagnosis,
        EventKind::Staging,
        EventKind::Treatment,
        EventKind::Biomarker,
        EventKind::Imaging,
        EventKind::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Diagnosis => "diagnosis",
            EventKind::Staging => "staging",
            EventKind::Treatment => "treatment",
            EventKind::Biomarker => "biomarker",
            EventKind::Imaging => "imaging",
            EventKind::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<EventKind> {
        EventKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl std::fmt::Display for EventKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One discrete clinical event. `intra_order` gives the total order among
/// events sharing an encounter time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalEvent {
    pub event_id: String,
    pub description: String,
    pub kind: EventKind,
    pub encounter_time: DateTime<Utc>,
    pub intra_order: u32,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

/// Keyword lexicon mapping each event kind to lowercase keywords.
#[derive(Debug, Clone, Default)]
pub struct EventLexicon {
    keywords: BTreeMap<EventKind, Vec<String>>,
}

impl EventLexicon {
    /// Load from a JSON map `{"treatment": ["chemotherapy", ...], ...}`.
    pub fn from_json_str(json: &str) -> Result<Self, CorpusError> {
        let raw: BTreeMap<String, Vec<String>> =
            serde_json::from_str(json).map_err(|e| CorpusError::Parse {
                line: 0,
                message: format!("lexicon: {e}"),
            })?;
        let mut keywords = BTreeMap::new();
        for (kind, words) in raw {
            let kind = EventKind::parse(&kind).ok_or(CorpusError::Field {
                line: 0,
                field: "kind",
                message: format!("unknown event kind in lexicon: {kind:?}"),
            })?;
            keywords.insert(kind, words.into_iter().map(|w| w.to_lowercase()).collect());
        }
        Ok(Self { keywords })
    }

    pub fn keywords_for(&self, kind: EventKind) -> &[String] {
        self.keywords.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, Default)]
pub struct EventExtraction {
    pub events: Vec<ClinicalEvent>,
    pub warnings: Vec<String>,
}

pub trait EventExtractorProvider: Send + Sync {
    fn extract(&self, condensed: &CondensedHistory) -> Result<EventExtraction, ProviderError>;
}

/// Lexicon-driven fallback extractor. Sentences are scanned in section
/// order; a sentence containing keywords of several kinds yields one event
/// per kind, in the fixed kind order. ASCII keywords match on word
/// boundaries (so "ct" does not fire inside "ductal"); keywords with
/// non-ASCII characters match as plain substrings, which is what
/// unsegmented CJK text needs.
#[derive(Debug, Clone, Default)]
pub struct LexiconExtractor {
    pub lexicon: EventLexicon,
}

impl LexiconExtractor {
    pub fn new(lexicon: EventLexicon) -> Self {
        Self { lexicon }
    }
}

fn keyword_matches(haystack: &str, keyword: &str) -> bool {
    if keyword.is_empty() {
        return false;
    }
    if !keyword.is_ascii() {
        return haystack.contains(keyword);
    }
    let mut from = 0usize;
    while let Some(pos) = haystack[from..].find(keyword) {
        let start = from + pos;
        let end = start + keyword.len();
        let before_ok = haystack[..start].chars().next_back().map_or(true, |c| !c.is_alphanumeric());
        let after_ok = haystack[end..].chars().next().map_or(true, |c| !c.is_alphanumeric());
        if before_ok && after_ok {
            return true;
        }
        from = start + keyword.len();
    }
    false
}

impl EventExtractorProvider for LexiconExtractor {
    fn extract(&self, condensed: &CondensedHistory) -> Result<EventExtraction, ProviderError> {
        let mut events = Vec::new();
        let mut intra: BTreeMap<DateTime<Utc>, u32> = BTreeMap::new();
        let mut seq = 0usize;
        for section in &condensed.sections {
            for sentence in split_sentences(&section.text) {
                let lowered = sentence.to_lowercase();
                for kind in EventKind::ALL {
                    let hit = self
                        .lexicon
                        .keywords_for(kind)
                        .iter()
                        .find(|kw| keyword_matches(&lowered, kw));
                    if let Some(keyword) = hit {
                        let order = intra.entry(section.encounter_time).or_insert(0);
                        let mut attributes = BTreeMap::new();
                        attributes.insert("keyword".to_string(), keyword.clone());
                        events.push(ClinicalEvent {
                            event_id: format!("ev-{seq:04}"),
                            description: sentence.clone(),
                            kind,
                            encounter_time: section.encounter_time,
                            intra_order: *order,
                            attributes,
                        });
                        *order += 1;
                        seq += 1;
                    }
                }
            }
        }
        events.sort_by_key(|e| (e.encounter_time, e.intra_order));
        let warnings = if events.is_empty() {
            vec!["no events extracted from condensed input".to_string()]
        } else {
            Vec::new()
        };
        Ok(EventExtraction { events, warnings })
    }
}

/// Run the extractor on a condensed history and enforce the output
/// contract: non-empty input, events totally ordered by
/// `(encounter_time, intra_order)`, unique event ids, and a warning when
/// nothing was extracted.
pub fn extract_events(
    condensed: &CondensedHistory,
    extractor: &dyn EventExtractorProvider,
) -> Result<EventExtraction, CorpusError> {
    if condensed.combined.trim().is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    let mut extraction = extractor.extract(condensed)?;
    for pair in extraction.events.windows(2) {
        let a = (pair[0].encounter_time, pair[0].intra_order);
        let b = (pair[1].encounter_time, pair[1].intra_order);
        if a >= b {
            return Err(ProviderError::new(
                "extractor",
                format!(
                    "events not strictly ordered by (encounter_time, intra_order): {:?} then {:?}",
                    pair[0].event_id, pair[1].event_id
                ),
            )
            .into());
        }
    }
    let mut ids: Vec<&str> = extraction.events.iter().map(|e| e.event_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != extraction.events.len() {
        return Err(ProviderError::new("extractor", "duplicate event ids").into());
    }
    if extraction.events.is_empty() && extraction.warnings.is_empty() {
        extraction
            .warnings
            .push("no events extracted from condensed input".to_string());
    }
    Ok(extraction)
}
