//! `gen-fixtures`: deterministic synthetic inputs for offline runs — a
//! 20-patient corpus, a 40-node oncology-shaped guideline graph with its
//! count manifest, a concept catalog, an event lexicon, evaluation items
//! with three synthetic reference raters, a context template, a judge
//! rubric, and a ready-to-run config pointing at all of them.

use std::fs;
use std::path::Path;

use anyhow::{ensure, Result};
use carepath_core::alignment::DEFAULT_TEMPLATE;
use carepath_core::guideline::{enumerate_paths, GuidelineKG};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::io_error;
use crate::evaluate::DEFAULT_RUBRIC;

pub const PATIENTS: usize = 20;
pub const ITEMS: usize = 24;
pub const GUIDELINE_NODES: usize = 40;

struct NodeSpec(&'static str, &'static str, &'static str); // id, kind, desc

const NODES: &[NodeSpec] = &[
    // breast branch
    NodeSpec("bc_root", "Cancer", "breast cancer diagnosis confirmed"),
    NodeSpec("bc_w1", "ClinicalSituation", "staging workup and biomarker assessment"),
    NodeSpec("bc_s1", "ClinicalSituation", "early stage breast cancer"),
    NodeSpec("bc_s2", "ClinicalSituation", "locally advanced breast cancer"),
    NodeSpec("bc_s3", "ClinicalSituation", "metastatic breast cancer"),
    NodeSpec("bc_t1", "Treatment", "breast conserving surgery"),
    NodeSpec("bc_t2", "Treatment", "adjuvant radiotherapy"),
    NodeSpec("bc_t3", "Treatment", "adjuvant chemotherapy"),
    NodeSpec("bc_t4", "Treatment", "endocrine therapy"),
    NodeSpec("bc_t5", "Treatment", "neoadjuvant chemotherapy"),
    NodeSpec("bc_t6", "Treatment", "mastectomy"),
    NodeSpec("bc_t7", "Treatment", "postoperative radiotherapy"),
    NodeSpec("bc_t8", "Treatment", "first line chemotherapy"),
    NodeSpec("bc_t9", "Treatment", "targeted her2 therapy"),
    NodeSpec("bc_t10", "Treatment", "palliative care planning"),
    NodeSpec("bc_t11", "Treatment", "salvage chemotherapy"),
    NodeSpec("bc_f1", "ClinicalSituation", "disease recurrence detected"),
    NodeSpec("bc_f2", "ClinicalSituation", "complete remission follow-up"),
    NodeSpec("bc_f3", "ClinicalSituation", "treatment response assessment imaging"),
    // lung branch
    NodeSpec("lc_root", "Cancer", "lung cancer diagnosis confirmed"),
    NodeSpec("lc_w1", "ClinicalSituation", "staging workup with ct imaging"),
    NodeSpec("lc_s1", "ClinicalSituation", "early stage lung cancer"),
    NodeSpec("lc_s2", "ClinicalSituation", "locally advanced lung cancer"),
    NodeSpec("lc_s3", "ClinicalSituation", "metastatic lung cancer"),
    NodeSpec("lc_t1", "Treatment", "surgical resection lobectomy"),
    NodeSpec("lc_t2", "Treatment", "adjuvant platinum chemotherapy"),
    NodeSpec("lc_t3", "Treatment", "stereotactic radiotherapy"),
    NodeSpec("lc_t4", "Treatment", "concurrent chemoradiotherapy"),
    NodeSpec("lc_t5", "Treatment", "consolidation immunotherapy"),
    NodeSpec("lc_t6", "Treatment", "first line immunotherapy"),
    NodeSpec("lc_t7", "Treatment", "targeted egfr therapy"),
    NodeSpec("lc_t8", "Treatment", "palliative radiotherapy"),
    NodeSpec("lc_t9", "Treatment", "maintenance chemotherapy"),
    NodeSpec("lc_t10", "Treatment", "second line chemotherapy"),
    NodeSpec("lc_t11", "Treatment", "palliative care planning"),
    NodeSpec("lc_f1", "ClinicalSituation", "disease progression on imaging"),
    NodeSpec("lc_f2", "ClinicalSituation", "stable disease surveillance"),
    NodeSpec("lc_f3", "ClinicalSituation", "treatment response assessment scan"),
    // shared sinks
    NodeSpec("sup1", "Other", "supportive care and symptom management"),
    NodeSpec("sup2", "Other", "survivorship follow-up program"),
];

const EDGES: &[(&str, &str, &str)] = &[
    // breast
    ("bc_root", "bc_w1", "leads_to"),
    ("bc_w1", "bc_s1", "stratifies"),
    ("bc_w1", "bc_s2", "stratifies"),
    ("bc_w1", "bc_s3", "stratifies"),
    ("bc_s1", "bc_t1", "recommends"),
    ("bc_s1", "bc_t3", "recommends"),
    ("bc_t1", "bc_t2", "followed_by"),
    ("bc_t2", "bc_t4", "followed_by"),
    ("bc_t3", "bc_t2", "followed_by"),
    ("bc_t3", "bc_t4", "followed_by"),
    ("bc_t4", "bc_f2", "monitored_by"),
    ("bc_f2", "sup2", "transitions_to"),
    ("bc_s2", "bc_t5", "recommends"),
    ("bc_t5", "bc_t6", "followed_by"),
    ("bc_t6", "bc_t7", "followed_by"),
    ("bc_t7", "bc_f3", "monitored_by"),
    ("bc_f3", "bc_f2", "resolves_to"),
    ("bc_f3", "bc_f1", "escalates_to"),
    ("bc_f1", "bc_t11", "recommends"),
    ("bc_t11", "sup1", "transitions_to"),
    ("bc_s3", "bc_t8", "recommends"),
    ("bc_s3", "bc_t9", "recommends"),
    ("bc_t8", "bc_t10", "followed_by"),
    ("bc_t9", "bc_t10", "followed_by"),
    ("bc_t10", "sup1", "transitions_to"),
    // lung
    ("lc_root", "lc_w1", "leads_to"),
    ("lc_w1", "lc_s1", "stratifies"),
    ("lc_w1", "lc_s2", "stratifies"),
    ("lc_w1", "lc_s3", "stratifies"),
    ("lc_s1", "lc_t1", "recommends"),
    ("lc_s1", "lc_t3", "recommends"),
    ("lc_t1", "lc_t2", "followed_by"),
    ("lc_t2", "lc_f2", "monitored_by"),
    ("lc_t3", "lc_f2", "monitored_by"),
    ("lc_f2", "sup2", "transitions_to"),
    ("lc_s2", "lc_t4", "recommends"),
    ("lc_t4", "lc_t5", "followed_by"),
    ("lc_t5", "lc_f3", "monitored_by"),
    ("lc_f3", "lc_f2", "resolves_to"),
    ("lc_f3", "lc_f1", "escalates_to"),
    ("lc_f1", "lc_t10", "recommends"),
    ("lc_t10", "lc_t11", "followed_by"),
    ("lc_t11", "sup1", "transitions_to"),
    ("lc_s3", "lc_t6", "recommends"),
    ("lc_s3", "lc_t7", "recommends"),
    ("lc_s3", "lc_t8", "recommends"),
    ("lc_t6", "lc_t9", "followed_by"),
    ("lc_t7", "lc_t9", "followed_by"),
    ("lc_t9", "lc_f3", "monitored_by"),
    ("lc_t8", "sup1", "transitions_to"),
];

const ROOTS: [&str; 2] = ["bc_root", "lc_root"];

const NOISE_SENTENCES: &[&str] = &[
    "Vital signs stable and unremarkable today.",
    "Patient reports mild fatigue without fever.",
    "Dietary counseling provided during the visit.",
    "Routine labs reviewed with the patient.",
    "No new complaints were voiced.",
    "Sleep quality improved since the last visit.",
];

const ZH_SENTENCES: &[&str] = &[
    "确诊乳腺癌。",
    "完成分期评估。",
    "开始辅助化疗。",
    "复查影像未见进展。",
];

fn guideline_json() -> serde_json::Value {
    json!({
        "nodes": NODES.iter().map(|NodeSpec(id, kind, desc)| json!({
            "id": id, "kind": kind, "desc": desc
        })).collect::<Vec<_>>(),
        "edges": EDGES.iter().map(|(src, dst, rel)| json!({
            "src": src, "dst": dst, "rel": rel
        })).collect::<Vec<_>>(),
        "roots": ROOTS,
    })
}

fn catalog_json() -> serde_json::Value {
    json!({
        "concepts": [
            {"id": "c001", "name": "breast cancer", "synonyms": ["breast carcinoma", "乳腺癌"], "category": "disease"},
            {"id": "c002", "name": "lung cancer", "synonyms": ["pulmonary carcinoma"], "category": "disease"},
            {"id": "c003", "name": "chemotherapy", "synonyms": ["chemo", "化疗"], "category": "procedure"},
            {"id": "c004", "name": "radiotherapy", "synonyms": ["radiation therapy", "放疗"], "category": "procedure"},
            {"id": "c005", "name": "mastectomy", "synonyms": [], "category": "procedure"},
            {"id": "c006", "name": "lobectomy", "synonyms": ["surgical resection"], "category": "procedure"},
            {"id": "c007", "name": "her2", "synonyms": ["her2 receptor"], "category": "biomarker"},
            {"id": "c008", "name": "egfr", "synonyms": ["egfr mutation"], "category": "biomarker"},
            {"id": "c009", "name": "palliative care", "synonyms": [], "category": "specialty"},
            {"id": "c010", "name": "remission", "synonyms": [], "category": "finding"},
            {"id": "c011", "name": "recurrence", "synonyms": ["relapse"], "category": "finding"},
            {"id": "c012", "name": "immunotherapy", "synonyms": [], "category": "procedure"},
            {"id": "c013", "name": "endocrine therapy", "synonyms": ["hormone therapy"], "category": "procedure"},
            {"id": "c014", "name": "surgery", "synonyms": ["operation", "手术"], "category": "procedure"},
            {"id": "c015", "name": "imaging", "synonyms": ["ct scan", "影像"], "category": "procedure"}
        ],
        "relations": [
            {"src": "c001", "dst": "c003", "rel": "treated_by"},
            {"src": "c001", "dst": "c005", "rel": "treated_by"},
            {"src": "c002", "dst": "c006", "rel": "treated_by"},
            {"src": "c002", "dst": "c012", "rel": "treated_by"},
            {"src": "c011", "dst": "c003", "rel": "treated_by"}
        ]
    })
}

fn lexicon_json() -> serde_json::Value {
    json!({
        "diagnosis": ["diagnosis", "diagnosed", "carcinoma", "cancer", "recurrence", "确诊", "癌"],
        "staging": ["stage", "staging", "分期"],
        "treatment": ["chemotherapy", "radiotherapy", "chemoradiotherapy", "immunotherapy",
                      "surgery", "mastectomy", "lobectomy", "resection", "therapy",
                      "palliative", "化疗", "放疗", "手术"],
        "biomarker": ["her2", "egfr", "biomarker", "受体"],
        "imaging": ["ct", "mri", "imaging", "scan", "影像"],
        "other": ["follow-up", "surveillance", "supportive care", "复查"]
    })
}

/// One patient's documents: a guideline path's step descriptions spread
/// over chronologically ordered encounter notes, mixed with noise.
fn corpus_jsonl(rng: &mut ChaCha8Rng, guideline: &GuidelineKG) -> Result<String> {
    let enumeration = enumerate_paths(guideline, 12, 10_000)?;
    ensure!(!enumeration.paths.is_empty(), "fixture guideline has no paths");
    let mut lines = Vec::new();
    for p in 0..PATIENTS {
        let pid = format!("p{:03}", p + 1);
        if p == PATIENTS - 1 {
            // one Chinese-language patient
            let mut day = 0i64;
            for (d, sentence) in ZH_SENTENCES.iter().enumerate() {
                day += rng.gen_range(20..120);
                let date = chrono::NaiveDate::from_ymd_opt(2019, 1, 1).unwrap()
                    + chrono::Duration::days(day);
                lines.push(
                    json!({
                        "patient_id": pid,
                        "timestamp": format!("{date}T08:00:00Z"),
                        "text": sentence,
                        "lang": "zh",
                        "note_index": d
                    })
                    .to_string(),
                );
            }
            continue;
        }
        let path = &enumeration.paths[rng.gen_range(0..enumeration.paths.len())];
        let steps: Vec<&str> = path
            .steps
            .iter()
            .map(|id| guideline.desc(id).expect("fixture step exists"))
            .collect();
        let doc_count = rng.gen_range(2..=steps.len().clamp(2, 5));
        // split the step descs across doc_count encounter notes, in order
        let mut assignments: Vec<Vec<String>> = vec![Vec::new(); doc_count];
        for (i, step) in steps.iter().enumerate() {
            let slot = (i * doc_count) / steps.len();
            assignments[slot].push(format!("{step}."));
        }
        let mut day = 0i64;
        for (d, mut sentences) in assignments.into_iter().enumerate() {
            day += rng.gen_range(20..160);
            let date = chrono::NaiveDate::from_ymd_opt(2018, 1, 1).unwrap()
                + chrono::Duration::days(day);
            // sprinkle noise after the clinical content
            for _ in 0..rng.gen_range(1..=2usize) {
                sentences.push(NOISE_SENTENCES[rng.gen_range(0..NOISE_SENTENCES.len())].to_string());
            }
            lines.push(
                json!({
                    "patient_id": pid,
                    "timestamp": format!("{date}T09:30:00Z"),
                    "text": sentences.join(" "),
                    "lang": "en",
                    "note_index": d
                })
                .to_string(),
            );
        }
    }
    Ok(lines.join("\n") + "\n")
}

fn items_jsonl(rng: &mut ChaCha8Rng) -> (String, Vec<(String, f64)>) {
    let mut lines = Vec::new();
    let mut qualities = Vec::new();
    for i in 0..ITEMS {
        let item_id = format!("item-{:02}", i + 1);
        let task = if i % 2 == 0 { "clinical_summary" } else { "clinical_recommendation" };
        let token_count = rng.gen_range(500..15_000usize);
        let quality = rng.gen_range(1.0..5.0f64);
        let candidate = format!(
            "Synthetic candidate text {} for {item_id} covering the treatment course.",
            i + 1
        );
        lines.push(
            json!({
                "item_id": item_id,
                "task": task,
                "prompt_context": format!("condensed record of about {token_count} tokens"),
                "candidate_text": candidate,
                "token_count": token_count
            })
            .to_string(),
        );
        qualities.push((item_id, quality));
    }
    (lines.join("\n") + "\n", qualities)
}

fn ratings_csv(rng: &mut ChaCha8Rng, qualities: &[(String, f64)]) -> String {
    let mut out = String::from("item_id,rater_id,factual,completeness,soundness,actionability\n");
    for rater in ["oncologist-1", "oncologist-2", "oncologist-3"] {
        for (item_id, quality) in qualities {
            let score = |rng: &mut ChaCha8Rng| -> i64 {
                let noisy = quality + rng.gen_range(-0.8..0.8);
                (noisy.round() as i64).clamp(1, 5)
            };
            out.push_str(&format!(
                "{item_id},{rater},{},{},{},{}\n",
                score(rng),
                score(rng),
                score(rng),
                score(rng)
            ));
        }
    }
    out
}

fn config_toml() -> String {
    "\
# generated fixture configuration; paths are relative to this file
corpus = corpus.jsonl
catalog = catalog.json
guideline = guideline.json
lexicon = lexicon.json
items = items.jsonl
ratings = ratings.csv
template = template.txt
rubric = rubric.txt

seed = 42
context_token_cap = 20000
output_token_cap = 4096
summary_ratio = 0.8

embedder = hash
embed_dim = 384
embed_batch_size = 32
embed_cache_capacity = 4096

alpha = 0.5
theta = 0.7
iterations = 10
top_n = 5
max_depth = 12
max_paths = 10000

parallelism = 4
stub_reranker = true
stub_judges = true
stub_judge_count = 3
"
    .to_string()
}

pub fn run(out_dir: &Path, seed: u64) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(io_error("creating fixture dir"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let guideline_value = guideline_json();
    let guideline_text = serde_json::to_string_pretty(&guideline_value)?;
    let guideline = GuidelineKG::from_json_str(&guideline_text)?;
    ensure!(
        guideline.nodes.len() == GUIDELINE_NODES,
        "fixture guideline must have {GUIDELINE_NODES} nodes, has {}",
        guideline.nodes.len()
    );
    let manifest = json!({
        "nodes": guideline.nodes.len(),
        "edges": guideline.edges.len(),
        "roots": guideline.roots.len(),
    });

    let corpus = corpus_jsonl(&mut rng, &guideline)?;
    let (items, qualities) = items_jsonl(&mut rng);
    let ratings = ratings_csv(&mut rng, &qualities);

    let write = |name: &str, content: &str| -> Result<()> {
        fs::write(out_dir.join(name), content)
            .map_err(io_error(format!("writing fixture {name}")))?;
        Ok(())
    };
    write("guideline.json", &guideline_text)?;
    write("guideline_manifest.json", &serde_json::to_string_pretty(&manifest)?)?;
    write("catalog.json", &serde_json::to_string_pretty(&catalog_json())?)?;
    write("lexicon.json", &serde_json::to_string_pretty(&lexicon_json())?)?;
    write("corpus.jsonl", &corpus)?;
    write("items.jsonl", &items)?;
    write("ratings.csv", &ratings)?;
    write("template.txt", DEFAULT_TEMPLATE)?;
    write("rubric.txt", DEFAULT_RUBRIC)?;
    write("config.toml", &config_toml())?;
    println!(
        "fixtures written to {} ({PATIENTS} patients, {} guideline nodes, {ITEMS} items)",
        out_dir.display(),
        guideline.nodes.len()
    );
    Ok(())
}
