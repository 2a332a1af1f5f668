//! `ingest`: corpus file -> per-patient event dumps and temporal knowledge
//! graphs under the output directory.

use std::fs;
use std::io::BufReader;
use std::path::Path;

use anyhow::{Context, Result};
use carepath_core::corpus::{
    build_condensed, extract_events, parse_corpus, EventLexicon, LexiconExtractor, PatientRecord,
    RaritySummarizer,
};
use carepath_core::tkg::{instantiate_tkg, ConceptCatalog, TemporalKG};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{io_error, PipelineConfig};
use crate::manifest::RunManifest;

#[derive(Debug, Serialize)]
pub struct PatientIngest {
    pub patient_id: String,
    pub documents: usize,
    pub events: usize,
    pub unlinked_entities: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct IngestSummary {
    pub patients: usize,
    pub documents: usize,
    pub events: usize,
    pub unlinked_entities: usize,
    pub per_patient: Vec<PatientIngest>,
}

struct PatientOutput {
    record_events: String,
    tkg_json: String,
    summary: PatientIngest,
}

pub fn run(config: &PipelineConfig, manifest: &mut RunManifest) -> Result<IngestSummary> {
    let corpus_path = config.require("corpus", &config.corpus)?;
    let catalog_path = config.require("catalog", &config.catalog)?;
    let lexicon_path = config.require("lexicon", &config.lexicon)?;
    manifest.record_input(&corpus_path)?;
    manifest.record_input(&catalog_path)?;
    manifest.record_input(&lexicon_path)?;

    let corpus_file = fs::File::open(&corpus_path)
        .map_err(io_error(format!("opening corpus {}", corpus_path.display())))?;
    let records = parse_corpus(BufReader::new(corpus_file))?;
    let catalog = ConceptCatalog::from_json_str(
        &fs::read_to_string(&catalog_path)
            .map_err(io_error(format!("reading catalog {}", catalog_path.display())))?,
    )?;
    let lexicon = EventLexicon::from_json_str(
        &fs::read_to_string(&lexicon_path)
            .map_err(io_error(format!("reading lexicon {}", lexicon_path.display())))?,
    )?;

    let summarizer = RaritySummarizer;
    let extractor = LexiconExtractor::new(lexicon);
    let caps = config.context_caps();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .context("building worker pool")?;
    let outputs: Result<Vec<PatientOutput>> = pool.install(|| {
        records
            .par_iter()
            .map(|record| process_patient(record, &summarizer, &extractor, &caps, &catalog))
            .collect()
    });
    let outputs = outputs?;

    let events_dir = config.out.join("events");
    let tkg_dir = config.out.join("tkg");
    if config.dump_events {
        fs::create_dir_all(&events_dir).map_err(io_error("creating events dir"))?;
    }
    if config.dump_tkg {
        fs::create_dir_all(&tkg_dir).map_err(io_error("creating tkg dir"))?;
    }

    let mut per_patient = Vec::with_capacity(outputs.len());
    let mut documents = 0usize;
    let mut events = 0usize;
    let mut unlinked = 0usize;
    for output in outputs {
        let pid = &output.summary.patient_id;
        if config.dump_events {
            fs::write(events_dir.join(format!("{pid}.jsonl")), &output.record_events)
                .map_err(io_error(format!("writing events for {pid}")))?;
        }
        if config.dump_tkg {
            fs::write(tkg_dir.join(format!("{pid}.json")), &output.tkg_json)
                .map_err(io_error(format!("writing tkg for {pid}")))?;
        }
        documents += output.summary.documents;
        events += output.summary.events;
        unlinked += output.summary.unlinked_entities;
        for warning in &output.summary.warnings {
            manifest.warn(format!("{pid}: {warning}"));
        }
        per_patient.push(output.summary);
    }

    let summary = IngestSummary {
        patients: per_patient.len(),
        documents,
        events,
        unlinked_entities: unlinked,
        per_patient,
    };
    write_json(&config.out.join("ingest_summary.json"), &summary)?;
    Ok(summary)
}

fn process_patient(
    record: &PatientRecord,
    summarizer: &RaritySummarizer,
    extractor: &LexiconExtractor,
    caps: &carepath_core::corpus::ContextCaps,
    catalog: &ConceptCatalog,
) -> Result<PatientOutput> {
    let pid = record.patient_id.clone();
    let condensed = build_condensed(record, summarizer, caps)
        .with_context(|| format!("condensing history for {pid}"))?;
    let extraction = extract_events(&condensed, extractor)
        .with_context(|| format!("extracting events for {pid}"))?;
    let tkg: TemporalKG = instantiate_tkg(&pid, &extraction.events, catalog)
        .with_context(|| format!("instantiating tkg for {pid}"))?;

    let mut lines = String::new();
    for event in &extraction.events {
        lines.push_str(&serde_json::to_string(event)?);
        lines.push('\n');
    }
    let summary = PatientIngest {
        patient_id: pid,
        documents: record.documents.len(),
        events: extraction.events.len(),
        unlinked_entities: tkg.unlinked_count(),
        warnings: extraction.warnings,
    };
    Ok(PatientOutput {
        record_events: lines,
        tkg_json: tkg.to_json_string()?,
        summary,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_error("creating output dir"))?;
    }
    let json = serde_json::to_string_pretty(value)?;
    fs::write(path, json).map_err(io_error(format!("writing {}", path.display())))?;
    Ok(())
}
