//! Clinical document ingestion: parse JSON Lines corpora, group and order
//! records per patient, split off the most recent note, condense the
//! remaining history under a token budget, and extract discrete clinical
//! events from the condensed text.

pub mod extract;
pub mod summarize;
pub mod text;

pub use extract::{
    extract_events, ClinicalEvent, EventExtraction, EventExtractorProvider, EventKind,
    EventLexicon, LexiconExtractor,
};
pub use summarize::{
    build_condensed, summarize_history, CondensedHistory, CondensedSection, ContextCaps,
    RaritySummarizer, SummarizerProvider, HISTORY_SEPARATOR,
};

use std::io::BufRead;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::ProviderError;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed document record: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: invalid field `{field}`: {message}")]
    Field {
        line: usize,
        field: &'static str,
        message: String,
    },
    #[error("patient record {patient_id} has no documents")]
    EmptyRecord { patient_id: String },
    #[error("summary token budget must be positive")]
    InvalidBudget,
    #[error("condensed input is empty")]
    EmptyInput,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One timestamped clinical document for a patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalDocument {
    pub patient_id: String,
    pub timestamp: DateTime<Utc>,
    pub text: String,
    pub lang: String,
}

/// All documents for one patient, sorted ascending by timestamp
/// (stable on ties, preserving input order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub documents: Vec<ClinicalDocument>,
}

#[derive(Deserialize)]
struct RawDocument {
    patient_id: String,
    timestamp: String,
    text: String,
    lang: String,
}

/// Parse an ISO-8601 timestamp. Accepts RFC 3339, a bare datetime
/// (assumed UTC), or a bare date (midnight UTC).
pub fn parse_timestamp(value: &str) -> Option<DateTime<Utc>> {
    if let Ok(ts) = DateTime::parse_from_rfc3339(value) {
        return Some(ts.with_timezone(&Utc));
    }
    if let Ok(naive) = NaiveDateTime::parse_from_str(value, "%Y-%m-%dT%H:%M:%S") {
        return Some(naive.and_utc());
    }
    if let Ok(date) = NaiveDate::parse_from_str(value, "%Y-%m-%d") {
        return Some(date.and_hms_opt(0, 0, 0).expect("midnight is valid").and_utc());
    }
    None
}

/// Parse a JSON Lines corpus into per-patient records.
///
/// One object per line: `{"patient_id", "timestamp", "text", "lang"}`;
/// unknown keys are ignored. Records come back sorted by patient id, and
/// each patient's documents are sorted ascending by timestamp with input
/// order preserved on ties. Empty input yields an empty set.
pub fn parse_corpus<R: BufRead>(input: R) -> Result<Vec<PatientRecord>, CorpusError> {
    let mut by_patient: std::collections::BTreeMap<String, Vec<(usize, ClinicalDocument)>> =
        std::collections::BTreeMap::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDocument = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let timestamp = parse_timestamp(&raw.timestamp).ok_or(CorpusError::Field {
            line: line_no,
            field: "timestamp",
            message: format!("not a valid ISO-8601 timestamp: {:?}", raw.timestamp),
        })?;
        if raw.text.trim().is_empty() {
            return Err(CorpusError::Field {
                line: line_no,
                field: "text",
                message: "empty after whitespace trim".into(),
            });
        }
        if raw.patient_id.is_empty() {
            return Err(CorpusError::Field {
                line: line_no,
                field: "patient_id",
                message: "empty".into(),
            });
        }
        let doc = ClinicalDocument {
            patient_id: raw.patient_id.clone(),
            timestamp,
            text: raw.text,
            lang: raw.lang,
        };
        by_patient.entry(raw.patient_id).or_default().push((idx, doc));
    }
    let records = by_patient
        .into_iter()
        .map(|(patient_id, mut docs)| {
            // input order is the tiebreak, so sort only by timestamp (stable)
            docs.sort_by_key(|(_, d)| d.timestamp);
            PatientRecord {
                patient_id,
                documents: docs.into_iter().map(|(_, d)| d).collect(),
            }
        })
        .collect();
    Ok(records)
}

/// Split a record into (historical documents, most recent note).
///
/// The recent note is the document with the latest timestamp; on ties the
/// one with the greatest input index wins. History keeps its order and may
/// be empty.
pub fn partition_history(
    record: &PatientRecord,
) -> Result<(Vec<&ClinicalDocument>, &ClinicalDocument), CorpusError> {
    if record.documents.is_empty() {
        return Err(CorpusError::EmptyRecord {
            patient_id: record.patient_id.clone(),
        });
    }
    let mut recent_idx = 0usize;
    for (i, doc) in record.documents.iter().enumerate() {
        if doc.timestamp >= record.documents[recent_idx].timestamp {
            recent_idx = i;
        }
    }
    let history = record
        .documents
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != recent_idx)
        .map(|(_, d)| d)
        .collect();
    Ok((history, &record.documents[recent_idx]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(pid: &str, ts: &str, text: &str) -> String {
        serde_json::json!({"patient_id": pid, "timestamp": ts, "text": text, "lang": "en"})
            .to_string()
    }

    #[test]
    fn groups_by_patient() {
        let input = [
            line("p2", "2021-01-01", "note a."),
            line("p1", "2020-05-01", "note b."),
            line("p2", "2021-02-01", "note c."),
        ]
        .join("\n");
        let records = parse_corpus(input.as_bytes()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].patient_id, "p1");
        assert_eq!(records[0].documents.len(), 1);
        assert_eq!(records[1].documents.len(), 2);
    }

    #[test]
    fn sorts_documents_ascending() {
        let input = [
            line("p1", "2020-01-02", "later."),
            line("p1", "2019-05-01", "earlier."),
        ]
        .join("\n");
        let records = parse_corpus(input.as_bytes()).unwrap();
        assert_eq!(records[0].documents[0].text, "earlier.");
        assert_eq!(records[0].documents[1].text, "later.");
    }

    #[test]
    fn empty_input_is_empty_set() {
        assert!(parse_corpus("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let input = format!("{}\nnot json", line("p1", "2020-01-01", "x."));
        match parse_corpus(input.as_bytes()) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_timestamp_reports_field() {
        let input = line("p1", "last tuesday", "x.");
        match parse_corpus(input.as_bytes()) {
            Err(CorpusError::Field { line, field, .. }) => {
                assert_eq!((line, field), (1, "timestamp"));
            }
            other => panic!("expected field error, got {other:?}"),
        }
    }

    #[test]
    fn blank_text_rejected() {
        let input = line("p1", "2020-01-01", "   ");
        assert!(matches!(
            parse_corpus(input.as_bytes()),
            Err(CorpusError::Field { field: "text", .. })
        ));
    }

    // Oracle: sort (patient_id, timestamp, input index) tuples independently
    // and compare with the parsed output order.
    #[test]
    fn randomized_corpus_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut lines = Vec::new();
        for i in 0..1000usize {
            let pid = format!("p{:02}", rng.gen_range(0..17));
            let day = rng.gen_range(1..=28);
            let month = rng.gen_range(1..=12);
            let ts = format!("2020-{month:02}-{day:02}T00:00:00Z");
            lines.push((pid, ts, format!("note {i}.")));
        }
        lines.shuffle(&mut rng);

        let oracle = {
            let mut tagged: Vec<(String, DateTime<Utc>, usize, String)> = lines
                .iter()
                .enumerate()
                .map(|(idx, (pid, ts, text))| {
                    (pid.clone(), parse_timestamp(ts).unwrap(), idx, text.clone())
                })
                .collect();
            tagged.sort_by(|a, b| (&a.0, a.1, a.2).cmp(&(&b.0, b.1, b.2)));
            tagged
        };

        let input = lines
            .iter()
            .map(|(pid, ts, text)| line(pid, ts, text))
            .collect::<Vec<_>>()
            .join("\n");
        let records = parse_corpus(input.as_bytes()).unwrap();
        let flattened: Vec<(String, DateTime<Utc>, String)> = records
            .iter()
            .flat_map(|r| {
                r.documents
                    .iter()
                    .map(|d| (d.patient_id.clone(), d.timestamp, d.text.clone()))
            })
            .collect();
        assert_eq!(flattened.len(), oracle.len());
        for (got, want) in flattened.iter().zip(oracle.iter()) {
            assert_eq!((&got.0, got.1, &got.2), (&want.0, want.1, &want.3));
        }
    }

    #[test]
    fn partition_singleton() {
        let records = parse_corpus(line("p1", "2020-01-01", "only.").as_bytes()).unwrap();
        let (history, recent) = partition_history(&records[0]).unwrap();
        assert!(history.is_empty());
        assert_eq!(recent.text, "only.");
    }

    #[test]
    fn partition_takes_latest() {
        let input = (1..=5)
            .map(|d| line("p1", &format!("2020-01-0{d}"), &format!("note {d}.")))
            .collect::<Vec<_>>()
            .join("\n");
        let records = parse_corpus(input.as_bytes()).unwrap();
        let (history, recent) = partition_history(&records[0]).unwrap();
        assert_eq!(recent.text, "note 5.");
        assert_eq!(history.len(), 4);
    }

    #[test]
    fn partition_tie_takes_greatest_input_index() {
        let input = [
            line("p1", "2020-01-01", "first."),
            line("p1", "2020-01-01", "second."),
        ]
        .join("\n");
        let records = parse_corpus(input.as_bytes()).unwrap();
        let (_, recent) = partition_history(&records[0]).unwrap();
        assert_eq!(recent.text, "second.");
    }

    #[test]
    fn partition_empty_record_errors() {
        let record = PatientRecord {
            patient_id: "p0".into(),
            documents: vec![],
        };
        assert!(matches!(
            partition_history(&record),
            Err(CorpusError::EmptyRecord { .. })
        ));
    }

    // Oracle: linear max-scan over 50 random documents.
    #[test]
    fn partition_matches_max_scan_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mut lines = Vec::new();
            for i in 0..50usize {
                let day = rng.gen_range(1..=9);
                lines.push(line("p1", &format!("2021-03-0{day}"), &format!("doc {i}.")));
            }
            let records = parse_corpus(lines.join("\n").as_bytes()).unwrap();
            let record = &records[0];

            let mut best = 0usize;
            for (i, d) in record.documents.iter().enumerate() {
                if d.timestamp >= record.documents[best].timestamp {
                    best = i;
                }
            }
            let (history, recent) = partition_history(record).unwrap();
            assert_eq!(recent, &record.documents[best]);
            assert_eq!(history.len(), 49);
        }
    }
}
