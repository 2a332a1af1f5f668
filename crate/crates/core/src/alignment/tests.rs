use std::collections::BTreeMap;

use chrono::{TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::{ClinicalEvent, EventKind};
use crate::embedding::{cosine_sim, Embedder, EmbeddingError, EmbeddingVector, HashEmbedder};
use crate::guideline::{GuidelineEdge, GuidelineKG, GuidelineNode, GuidelinePath, NodeKind};
use crate::tkg::{TemporalKG, Trajectory};

fn embedder() -> HashEmbedder {
    HashEmbedder::new(64, 1234).unwrap()
}

fn trajectory(descs: &[&str]) -> Trajectory {
    Trajectory {
        patient_id: "p1".into(),
        events: descs
            .iter()
            .enumerate()
            .map(|(i, d)| ClinicalEvent {
                event_id: format!("ev-{i:04}"),
                description: d.to_string(),
                kind: EventKind::Other,
                encounter_time: Utc
                    .with_ymd_and_hms(2021, 1, 1, 0, 0, 0)
                    .unwrap()
                    + chrono::Duration::days(i as i64),
                intra_order: 0,
                attributes: BTreeMap::new(),
            })
            .collect(),
    }
}

/// Guideline with one node per desc, chained; ids g0, g1, ...
fn guideline(descs: &[&str]) -> (GuidelineKG, GuidelinePath) {
    let nodes: Vec<GuidelineNode> = descs
        .iter()
        .enumerate()
        .map(|(i, d)| GuidelineNode {
            id: format!("g{i}"),
            kind: NodeKind::Other,
            desc: d.to_string(),
        })
        .collect();
    let edges: Vec<GuidelineEdge> = (1..descs.len())
        .map(|i| GuidelineEdge {
            src: format!("g{}", i - 1),
            dst: format!("g{i}"),
            rel: "next".into(),
        })
        .collect();
    let path = GuidelinePath {
        path_id: "path-0000".into(),
        steps: nodes.iter().map(|n| n.id.clone()).collect(),
    };
    (
        GuidelineKG {
            nodes,
            edges,
            roots: vec!["g0".into()],
        },
        path,
    )
}

fn random_texts(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    const VOCAB: [&str; 24] = [
        "chemotherapy", "radiotherapy", "surgery", "staging", "biopsy", "relapse", "remission",
        "her2", "positive", "negative", "cycle", "adjuvant", "neoadjuvant", "imaging", "ct",
        "response", "partial", "complete", "breast", "lung", "cancer", "therapy", "endocrine",
        "followup",
    ];
    (0..n)
        .map(|_| {
            let k = rng.gen_range(1..=4usize);
            (0..k)
                .map(|_| VOCAB[rng.gen_range(0..VOCAB.len())])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

// ---------------------------------------------------------------------------
// score_path / rank_paths
// ---------------------------------------------------------------------------

#[test]
fn identity_texts_score_path_length() {
    let descs = ["alpha one", "beta two", "gamma three", "delta four"];
    let traj = trajectory(&descs);
    let (g, path) = guideline(&descs);
    let scored = score_path(&traj, &path, &g, &embedder()).unwrap();
    assert_eq!(scored.score, descs.len() as f64);
    for psb in &scored.per_step_best {
        assert_eq!(psb.best_sim, 1.0);
    }
}

#[test]
fn degenerate_single_pair_is_plain_cosine() {
    let traj = trajectory(&["chemotherapy cycle"]);
    let (g, path) = guideline(&["adjuvant chemotherapy"]);
    let e = embedder();
    let scored = score_path(&traj, &path, &g, &e).unwrap();
    let u = e.embed_one("adjuvant chemotherapy").unwrap();
    let v = e.embed_one("chemotherapy cycle").unwrap();
    assert_eq!(scored.score, cosine_sim(&u, &v).unwrap());
}

#[test]
fn empty_inputs_are_preconditions() {
    let traj = trajectory(&["x"]);
    let (g, path) = guideline(&["y"]);
    let empty_traj = Trajectory {
        patient_id: "p".into(),
        events: vec![],
    };
    assert!(matches!(
        score_path(&empty_traj, &path, &g, &embedder()),
        Err(AlignmentError::EmptyTrajectory)
    ));
    let empty_path = GuidelinePath {
        path_id: "p".into(),
        steps: vec![],
    };
    assert!(matches!(
        score_path(&traj, &empty_path, &g, &embedder()),
        Err(AlignmentError::EmptyPath)
    ));
}

// Oracle: independent double loop with earliest-event tie handling.
#[test]
fn random_instances_match_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let e = embedder();
    for _ in 0..50 {
        let m = rng.gen_range(1..=12usize);
        let l = rng.gen_range(1..=7usize);
        let event_texts = random_texts(&mut rng, m);
        let step_texts = random_texts(&mut rng, l);
        let traj = trajectory(&event_texts.iter().map(String::as_str).collect::<Vec<_>>());
        let (g, path) = guideline(&step_texts.iter().map(String::as_str).collect::<Vec<_>>());

        let scored = score_path(&traj, &path, &g, &e).unwrap();

        let step_vecs: Vec<EmbeddingVector> =
            step_texts.iter().map(|t| e.embed_one(t).unwrap()).collect();
        let event_vecs: Vec<EmbeddingVector> =
            event_texts.iter().map(|t| e.embed_one(t).unwrap()).collect();
        let mut oracle_score = 0.0;
        for (j, sv) in step_vecs.iter().enumerate() {
            let mut best = f64::NEG_INFINITY;
            let mut best_i = 0usize;
            for (i, ev) in event_vecs.iter().enumerate() {
                let sim = cosine_sim(sv, ev).unwrap();
                if sim > best {
                    best = sim;
                    best_i = i;
                }
            }
            oracle_score += best;
            assert_eq!(
                scored.per_step_best[j].best_event_id,
                format!("ev-{best_i:04}"),
                "argmax mismatch at step {j}"
            );
            assert!((scored.per_step_best[j].best_sim - best).abs() < 1e-9);
        }
        assert!((scored.score - oracle_score).abs() < 1e-9);
        // decomposition invariant
        let sum: f64 = scored.per_step_best.iter().map(|p| p.best_sim).sum();
        assert!((scored.score - sum).abs() < 1e-9);
    }
}

#[test]
fn rank_single_candidate_is_best() {
    let traj = trajectory(&["a b"]);
    let (g, path) = guideline(&["a b"]);
    let ranked = rank_paths(&traj, std::slice::from_ref(&path), &g, &embedder(), 5).unwrap();
    assert_eq!(ranked.len(), 1);
    assert_eq!(ranked[0].path.path_id, path.path_id);
}

#[test]
fn rank_tie_keeps_enumeration_order() {
    let traj = trajectory(&["alpha beta"]);
    let (g, _) = guideline(&["alpha beta", "alpha beta"]);
    // two single-step paths over nodes with identical descs -> equal scores
    let paths = vec![
        GuidelinePath { path_id: "path-0000".into(), steps: vec!["g0".into()] },
        GuidelinePath { path_id: "path-0001".into(), steps: vec!["g1".into()] },
    ];
    for _ in 0..20 {
        let ranked = rank_paths(&traj, &paths, &g, &embedder(), 5).unwrap();
        assert_eq!(ranked[0].path.path_id, "path-0000");
        assert_eq!(ranked[1].path.path_id, "path-0001");
    }
}

// Oracle: score each path independently, stable-sort by descending score.
#[test]
fn rank_matches_sort_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let e = embedder();
    let event_texts = random_texts(&mut rng, 8);
    let traj = trajectory(&event_texts.iter().map(String::as_str).collect::<Vec<_>>());

    let all_step_texts = random_texts(&mut rng, 30);
    let (g, _) = guideline(&all_step_texts.iter().map(String::as_str).collect::<Vec<_>>());
    let paths: Vec<GuidelinePath> = (0..25)
        .map(|i| {
            let len = rng.gen_range(1..=5usize);
            let steps: Vec<String> =
                (0..len).map(|_| format!("g{}", rng.gen_range(0..30))).collect();
            GuidelinePath { path_id: format!("path-{i:04}"), steps }
        })
        .collect();

    let ranked = rank_paths(&traj, &paths, &g, &e, paths.len()).unwrap();

    let mut oracle: Vec<(usize, f64)> = paths
        .iter()
        .enumerate()
        .map(|(i, p)| (i, score_path(&traj, p, &g, &e).unwrap().score))
        .collect();
    oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    for (got, (idx, score)) in ranked.iter().zip(oracle) {
        assert_eq!(got.path.path_id, paths[idx].path_id);
        assert!((got.score - score).abs() < 1e-12);
    }
}

#[test]
fn argmax_invariant_under_positive_scaling() {
    struct Scaled<E>(E, f64);
    impl<E: Embedder> Embedder for Scaled<E> {
        fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
            Ok(self
                .0
                .embed(texts)?
                .into_iter()
                .map(|v| EmbeddingVector::new(v.values.iter().map(|x| x * self.1).collect()))
                .collect())
        }
        fn dim(&self) -> usize {
            self.0.dim()
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let event_texts = random_texts(&mut rng, 8);
    let step_texts = random_texts(&mut rng, 20);
    let traj = trajectory(&event_texts.iter().map(String::as_str).collect::<Vec<_>>());
    let (g, _) = guideline(&step_texts.iter().map(String::as_str).collect::<Vec<_>>());
    let paths: Vec<GuidelinePath> = (0..10)
        .map(|i| GuidelinePath {
            path_id: format!("path-{i:04}"),
            steps: (0..3).map(|j| format!("g{}", (i * 3 + j) % 20)).collect(),
        })
        .collect();

    let plain = rank_paths(&traj, &paths, &g, &embedder(), 10).unwrap();
    let scaled = rank_paths(&traj, &paths, &g, &Scaled(embedder(), 7.25), 10).unwrap();
    let ids = |v: &[ScoredPath]| v.iter().map(|s| s.path.path_id.clone()).collect::<Vec<_>>();
    assert_eq!(ids(&plain), ids(&scaled));
    for (a, b) in plain.iter().zip(&scaled) {
        let pick = |s: &ScoredPath| {
            s.per_step_best.iter().map(|p| p.best_event_id.clone()).collect::<Vec<_>>()
        };
        assert_eq!(pick(a), pick(b));
    }
}

// ---------------------------------------------------------------------------
// seed_pairs
// ---------------------------------------------------------------------------

fn scored_path(steps: &[&str], best: &[(&str, f64)]) -> ScoredPath {
    ScoredPath {
        path: GuidelinePath {
            path_id: "path-0000".into(),
            steps: steps.iter().map(|s| s.to_string()).collect(),
        },
        score: best.iter().map(|(_, s)| s).sum(),
        per_step_best: best
            .iter()
            .enumerate()
            .map(|(i, (event, sim))| PerStepBest {
                step_index: i,
                best_event_id: event.to_string(),
                best_sim: *sim,
            })
            .collect(),
    }
}

#[test]
fn all_above_threshold_seed_every_step() {
    let sp = scored_path(
        &["s0", "s1", "s2"],
        &[("e0", 1.0), ("e1", 1.0), ("e2", 1.0)],
    );
    let seeds = seed_pairs(&sp, 0.7);
    assert_eq!(seeds.len(), 3);
}

#[test]
fn all_below_threshold_seed_nothing() {
    let sp = scored_path(&["s0", "s1"], &[("e0", 0.5), ("e1", 0.69)]);
    assert!(seed_pairs(&sp, 0.7).is_empty());
}

// Oracle: filter rule executed by hand on this fixture — step1 is below
// threshold, e1 is best for steps 0 and 2 and keeps the 0.9 pair.
#[test]
fn mixed_sims_match_hand_executed_filter() {
    let sp = scored_path(
        &["s0", "s1", "s2", "s3"],
        &[("e1", 0.9), ("e2", 0.65), ("e1", 0.8), ("e3", 0.71)],
    );
    let seeds = seed_pairs(&sp, 0.7);
    assert_eq!(
        seeds.pairs(),
        &[
            AlignmentPair { event_id: "e1".into(), step_id: "s0".into(), confidence: 0.9 },
            AlignmentPair { event_id: "e3".into(), step_id: "s3".into(), confidence: 0.71 },
        ]
    );
}

#[test]
fn duplicate_event_equal_sims_keep_earliest_step() {
    let sp = scored_path(&["s0", "s1"], &[("e0", 0.8), ("e0", 0.8)]);
    let seeds = seed_pairs(&sp, 0.7);
    assert_eq!(seeds.pairs().len(), 1);
    assert_eq!(seeds.pairs()[0].step_id, "s0");
}

// ---------------------------------------------------------------------------
// neighborhood_score
// ---------------------------------------------------------------------------

#[test]
fn empty_alignment_set_scores_zero() {
    let traj = trajectory(&["a"]);
    let (g, _) = guideline(&["b"]);
    let lookup = DescLookup::new(&traj, &g);
    let got =
        neighborhood_score(("a", "b"), &AlignmentSet::new(), &lookup, &embedder()).unwrap();
    assert_eq!(got, 0.0);
}

#[test]
fn identical_candidate_and_seed_scores_one() {
    let traj = trajectory(&["event text"]);
    let (g, _) = guideline(&["step text"]);
    let lookup = DescLookup::new(&traj, &g);
    let mut current = AlignmentSet::new();
    current.insert(AlignmentPair {
        event_id: "ev-0000".into(),
        step_id: "g0".into(),
        confidence: 1.0,
    });
    let got =
        neighborhood_score(("event text", "step text"), &current, &lookup, &embedder()).unwrap();
    assert_eq!(got, 1.0);
}

// Oracle: apply the formula term by term with separately computed cosines.
#[test]
fn five_seed_pairs_match_term_by_term_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let e = embedder();
    let event_texts = random_texts(&mut rng, 6);
    let step_texts = random_texts(&mut rng, 6);
    let traj = trajectory(&event_texts.iter().map(String::as_str).collect::<Vec<_>>());
    let (g, _) = guideline(&step_texts.iter().map(String::as_str).collect::<Vec<_>>());
    let lookup = DescLookup::new(&traj, &g);

    let mut current = AlignmentSet::new();
    for i in 0..5 {
        current.insert(AlignmentPair {
            event_id: format!("ev-{i:04}"),
            step_id: format!("g{i}"),
            confidence: 1.0,
        });
    }
    let candidate = (event_texts[5].as_str(), step_texts[5].as_str());
    let got = neighborhood_score(candidate, &current, &lookup, &e).unwrap();

    let cu = e.embed_one(candidate.0).unwrap();
    let cs = e.embed_one(candidate.1).unwrap();
    let mut terms = Vec::new();
    for pair in current.pairs() {
        let i: usize = pair.event_id[3..].parse().unwrap();
        let j: usize = pair.step_id[1..].parse().unwrap();
        let se = e.embed_one(&event_texts[i]).unwrap();
        let ss = e.embed_one(&step_texts[j]).unwrap();
        let event_side = cosine_sim(&cu, &se).unwrap();
        let step_side = cosine_sim(&cs, &ss).unwrap();
        terms.push(0.5 * (event_side + step_side));
    }
    let expected = terms.iter().sum::<f64>() / terms.len() as f64;
    assert!((got - expected).abs() < 1e-12);
}

// ---------------------------------------------------------------------------
// expand_alignment
// ---------------------------------------------------------------------------

#[test]
fn impossible_threshold_returns_seed_exactly() {
    let descs = ["one a", "two b", "three c"];
    let traj = trajectory(&descs);
    let (g, path) = guideline(&descs);
    let ranked = rank_paths(&traj, std::slice::from_ref(&path), &g, &embedder(), 1).unwrap();
    let seed = seed_pairs(&ranked[0], 0.7);
    let config = BootstrapConfig {
        theta: 1.01,
        ..BootstrapConfig::default()
    };
    let out = expand_alignment(&traj, &path, &g, &seed, &config, &embedder()).unwrap();
    assert_eq!(out.final_set, seed);
    assert!(out.added_per_iteration.is_empty());
}

#[test]
fn identity_texts_align_fully_in_one_iteration() {
    let descs = ["alpha x", "beta y", "gamma z", "delta w", "epsilon v"];
    let traj = trajectory(&descs);
    let (g, path) = guideline(&descs);
    let config = BootstrapConfig {
        alpha: 1.0,
        theta: 0.7,
        ..BootstrapConfig::default()
    };
    let out =
        expand_alignment(&traj, &path, &g, &AlignmentSet::new(), &config, &embedder()).unwrap();
    assert_eq!(out.final_set.len(), descs.len());
    assert_eq!(out.iterations_used, 1);
    assert_eq!(out.added_per_iteration, vec![descs.len()]);
    for (i, pair) in out.final_set.pairs().iter().enumerate() {
        assert_eq!(pair.event_id, format!("ev-{i:04}"));
        assert_eq!(pair.step_id, format!("g{i}"));
        assert_eq!(pair.confidence, 1.0);
    }
}

/// Independent straight-line reimplementation of the expansion loop.
fn expand_oracle(
    event_texts: &[String],
    step_texts: &[String],
    seed: &[(String, String, f64)],
    alpha: f64,
    theta: f64,
    max_iterations: usize,
    e: &dyn Embedder,
) -> BTreeMap<String, (String, f64)> {
    fn cos(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
        let mut dot = 0.0;
        let mut na = 0.0;
        let mut nb = 0.0;
        for (x, y) in a.values.iter().zip(&b.values) {
            dot += x * y;
            na += x * x;
            nb += y * y;
        }
        (dot / (na * nb).sqrt()).clamp(-1.0, 1.0)
    }
    let event_vecs: Vec<EmbeddingVector> =
        event_texts.iter().map(|t| e.embed_one(t).unwrap()).collect();
    let step_vecs: Vec<EmbeddingVector> =
        step_texts.iter().map(|t| e.embed_one(t).unwrap()).collect();

    let mut aligned: BTreeMap<String, (String, f64)> = seed
        .iter()
        .map(|(ev, st, c)| (ev.clone(), (st.clone(), *c)))
        .collect();
    for _ in 0..max_iterations {
        let unaligned: Vec<usize> = (0..event_texts.len())
            .filter(|i| !aligned.contains_key(&format!("ev-{i:04}")))
            .collect();
        if unaligned.is_empty() {
            break;
        }
        // ids follow the fixed "ev-NNNN" / "gN" shapes used by the helpers
        let snapshot: Vec<(usize, usize)> = aligned
            .iter()
            .map(|(ev, (st, _))| {
                let ei: usize = ev[3..].parse().unwrap();
                let si: usize = st[1..].parse().unwrap();
                (ei, si)
            })
            .collect();
        let mut new_pairs: Vec<(usize, usize, f64)> = Vec::new();
        for &ei in &unaligned {
            let mut best: Option<(f64, usize)> = None;
            for si in 0..step_texts.len() {
                let sem = cos(&event_vecs[ei], &step_vecs[si]);
                let hood = if snapshot.is_empty() {
                    0.0
                } else {
                    snapshot
                        .iter()
                        .map(|&(sei, ssi)| {
                            0.5 * (cos(&event_vecs[ei], &event_vecs[sei])
                                + cos(&step_vecs[si], &step_vecs[ssi]))
                        })
                        .sum::<f64>()
                        / snapshot.len() as f64
                };
                let w = alpha * sem + (1.0 - alpha) * hood;
                if w > theta && best.map_or(true, |(bw, _)| w > bw) {
                    best = Some((w, si));
                }
            }
            if let Some((w, si)) = best {
                new_pairs.push((ei, si, w));
            }
        }
        if new_pairs.is_empty() {
            break;
        }
        for (ei, si, w) in new_pairs {
            aligned.insert(format!("ev-{ei:04}"), (format!("g{si}"), w));
        }
    }
    aligned
}

// Oracle: independent loop, all three alpha settings, pair-for-pair.
#[test]
fn random_instances_match_expansion_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let e = embedder();
    for round in 0..30 {
        let m = rng.gen_range(2..=10usize);
        let l = rng.gen_range(2..=6usize);
        let event_texts = random_texts(&mut rng, m);
        let step_texts = random_texts(&mut rng, l);
        let traj = trajectory(&event_texts.iter().map(String::as_str).collect::<Vec<_>>());
        let (g, path) = guideline(&step_texts.iter().map(String::as_str).collect::<Vec<_>>());

        for alpha in [0.0, 0.5, 1.0] {
            let theta = 0.6;
            let ranked = rank_paths(&traj, std::slice::from_ref(&path), &g, &e, 1).unwrap();
            let seed = seed_pairs(&ranked[0], theta);
            let config = BootstrapConfig {
                alpha,
                theta,
                max_iterations: 10,
                ..BootstrapConfig::default()
            };
            let out = expand_alignment(&traj, &path, &g, &seed, &config, &e).unwrap();

            let seed_tuples: Vec<(String, String, f64)> = seed
                .pairs()
                .iter()
                .map(|p| (p.event_id.clone(), p.step_id.clone(), p.confidence))
                .collect();
            let oracle = expand_oracle(
                &event_texts,
                &step_texts,
                &seed_tuples,
                alpha,
                theta,
                10,
                &e,
            );
            assert_eq!(out.final_set.len(), oracle.len(), "round {round} alpha {alpha}");
            for pair in out.final_set.pairs() {
                let (step, conf) = oracle
                    .get(&pair.event_id)
                    .unwrap_or_else(|| panic!("missing {:?}", pair.event_id));
                assert_eq!(&pair.step_id, step, "round {round} alpha {alpha}");
                assert!((pair.confidence - conf).abs() < 1e-9);
            }
            // monotone growth and termination bound
            assert!(out.iterations_used <= config.max_iterations);
            assert!(out.final_set.len() >= seed.len());
            assert!(out.added_per_iteration.iter().all(|&n| n >= 1));
            assert_eq!(
                out.added_per_iteration.iter().sum::<usize>(),
                out.final_set.len() - seed.len()
            );
            // seeds never re-aligned
            for sp in seed.pairs() {
                let kept = out
                    .final_set
                    .pairs()
                    .iter()
                    .find(|p| p.event_id == sp.event_id)
                    .unwrap();
                assert_eq!(kept, sp);
            }
        }
    }
}

#[test]
fn raising_theta_never_enlarges_result() {
    // alpha = 1 first (provable per-event independence), then the full
    // pipeline at alpha = 0.5 on fixed instances
    let mut rng = ChaCha8Rng::seed_from_u64(710);
    let e = embedder();
    for alpha in [1.0, 0.5] {
        for _ in 0..10 {
            let event_texts = random_texts(&mut rng, 8);
            let step_texts = random_texts(&mut rng, 5);
            let traj = trajectory(&event_texts.iter().map(String::as_str).collect::<Vec<_>>());
            let (g, path) = guideline(&step_texts.iter().map(String::as_str).collect::<Vec<_>>());
            let ranked = rank_paths(&traj, std::slice::from_ref(&path), &g, &e, 1).unwrap();
            let mut sizes = Vec::new();
            for theta in [0.3, 0.5, 0.7, 0.9] {
                let seed = seed_pairs(&ranked[0], theta);
                let config = BootstrapConfig { alpha, theta, ..BootstrapConfig::default() };
                let out = expand_alignment(&traj, &path, &g, &seed, &config, &e).unwrap();
                sizes.push(out.final_set.len());
            }
            for w in sizes.windows(2) {
                assert!(w[1] <= w[0], "sizes not monotone: {sizes:?}");
            }
        }
    }
}

#[test]
fn one_event_never_appears_twice() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let e = embedder();
    for _ in 0..10 {
        let event_texts = random_texts(&mut rng, 10);
        let step_texts = random_texts(&mut rng, 6);
        let traj = trajectory(&event_texts.iter().map(String::as_str).collect::<Vec<_>>());
        let (g, path) = guideline(&step_texts.iter().map(String::as_str).collect::<Vec<_>>());
        let ranked = rank_paths(&traj, std::slice::from_ref(&path), &g, &e, 1).unwrap();
        let seed = seed_pairs(&ranked[0], 0.5);
        let config = BootstrapConfig { theta: 0.5, ..BootstrapConfig::default() };
        let out = expand_alignment(&traj, &path, &g, &seed, &config, &e).unwrap();
        let mut events: Vec<&str> = out.final_set.pairs().iter().map(|p| p.event_id.as_str()).collect();
        let before = events.len();
        events.sort_unstable();
        events.dedup();
        assert_eq!(events.len(), before);
    }
}

#[test]
fn whole_graph_scope_reaches_steps_outside_best_path() {
    let traj = trajectory(&["unique offpath text", "alpha x"]);
    // nodes: g0 matches event 0 only through the whole graph; best path is [g1]
    let g = GuidelineKG {
        nodes: vec![
            GuidelineNode { id: "g0".into(), kind: NodeKind::Other, desc: "unique offpath text".into() },
            GuidelineNode { id: "g1".into(), kind: NodeKind::Other, desc: "alpha x".into() },
        ],
        edges: vec![],
        roots: vec!["g0".into(), "g1".into()],
    };
    let best_path = GuidelinePath { path_id: "path-0000".into(), steps: vec!["g1".into()] };
    let base = BootstrapConfig { alpha: 1.0, theta: 0.7, ..BootstrapConfig::default() };

    let restricted =
        expand_alignment(&traj, &best_path, &g, &AlignmentSet::new(), &base, &embedder()).unwrap();
    assert_eq!(restricted.final_set.len(), 1); // only ev-0001 -> g1 clears theta

    let wide = BootstrapConfig { scope: ExpansionScope::WholeGraph, ..base };
    let expanded =
        expand_alignment(&traj, &best_path, &g, &AlignmentSet::new(), &wide, &embedder()).unwrap();
    assert_eq!(expanded.final_set.len(), 2);
}

// ---------------------------------------------------------------------------
// merge_graphs / render_context
// ---------------------------------------------------------------------------

fn tkg_from(traj: &Trajectory) -> TemporalKG {
    crate::tkg::instantiate_tkg(
        &traj.patient_id,
        &traj.events,
        &crate::tkg::ConceptCatalog::default(),
    )
    .unwrap()
}

#[test]
fn empty_alignment_merges_to_plain_union() {
    let descs = ["a b", "c d"];
    let traj = trajectory(&descs);
    let (g, _) = guideline(&descs);
    let tkg = tkg_from(&traj);
    let fused = merge_graphs(&g, &tkg, &AlignmentSet::new()).unwrap();
    assert_eq!(fused.node_count(), g.nodes.len() + tkg.entities.len());
    assert_eq!(fused.evidence_edges.len(), 0);
    assert_eq!(fused.edge_count(), g.edges.len() + tkg.relations.len());
}

#[test]
fn three_pairs_make_three_weighted_edges() {
    let descs = ["a b", "c d", "e f"];
    let traj = trajectory(&descs);
    let (g, _) = guideline(&descs);
    let tkg = tkg_from(&traj);
    let mut set = AlignmentSet::new();
    for (i, conf) in [(0usize, 0.9f64), (1, 0.8), (2, 0.75)] {
        set.insert(AlignmentPair {
            event_id: format!("ev-{i:04}"),
            step_id: format!("g{i}"),
            confidence: conf,
        });
    }
    let fused = merge_graphs(&g, &tkg, &set).unwrap();
    assert_eq!(fused.evidence_edges.len(), 3);
    let weights: Vec<f64> = fused.evidence_edges.iter().map(|e| e.weight).collect();
    assert_eq!(weights, vec![0.9, 0.8, 0.75]);
    assert!(fused.evidence_edges.iter().all(|e| e.label == EVIDENCE_LABEL));
}

// Oracle: counts computed from the construction arithmetic.
#[test]
fn fixture_counts_match_counting_oracle() {
    let step_descs: Vec<String> = (0..14).map(|i| format!("step text {i}")).collect();
    let event_descs: Vec<String> = (0..9).map(|i| format!("event text {i}")).collect();
    let traj = trajectory(&event_descs.iter().map(String::as_str).collect::<Vec<_>>());
    let (g, _) = guideline(&step_descs.iter().map(String::as_str).collect::<Vec<_>>());
    let tkg = tkg_from(&traj);
    let mut set = AlignmentSet::new();
    for i in 0..5 {
        set.insert(AlignmentPair {
            event_id: format!("ev-{i:04}"),
            step_id: format!("g{i}"),
            confidence: 0.8,
        });
    }
    let fused = merge_graphs(&g, &tkg, &set).unwrap();
    assert_eq!(fused.node_count(), 23);
    assert_eq!(fused.edge_count(), g.edges.len() + tkg.relations.len() + 5);
}

#[test]
fn dangling_pair_is_named() {
    let descs = ["a b"];
    let traj = trajectory(&descs);
    let (g, _) = guideline(&descs);
    let tkg = tkg_from(&traj);
    let mut set = AlignmentSet::new();
    set.insert(AlignmentPair {
        event_id: "ev-9999".into(),
        step_id: "g0".into(),
        confidence: 1.0,
    });
    match merge_graphs(&g, &tkg, &set) {
        Err(AlignmentError::DanglingPair { event_id, .. }) => assert_eq!(event_id, "ev-9999"),
        other => panic!("expected dangling pair, got {other:?}"),
    }
}

#[test]
fn render_reports_evidence_lines_and_is_deterministic() {
    let descs = ["a b", "c d", "e f", "g h", "i j"];
    let traj = trajectory(&descs);
    let (g, path) = guideline(&descs);
    let tkg = tkg_from(&traj);
    let mut set = AlignmentSet::new();
    for i in 0..5 {
        set.insert(AlignmentPair {
            event_id: format!("ev-{i:04}"),
            step_id: format!("g{i}"),
            confidence: 0.9,
        });
    }
    let fused = merge_graphs(&g, &tkg, &set).unwrap();
    let best = score_path(&traj, &path, &g, &embedder()).unwrap();
    let template = ContextTemplate::default();

    let first = render_context(&fused, &traj, &best, &template).unwrap();
    let evidence_lines = first
        .text
        .lines()
        .filter(|l| l.contains(EVIDENCE_LABEL))
        .count();
    assert_eq!(evidence_lines, 5);
    assert!(first.token_count > 0);
    for _ in 0..3 {
        let again = render_context(&fused, &traj, &best, &template).unwrap();
        assert_eq!(again.text, first.text);
    }
}

#[test]
fn empty_evidence_renders_trajectory_and_path_only() {
    let descs = ["a b", "c d"];
    let traj = trajectory(&descs);
    let (g, path) = guideline(&descs);
    let tkg = tkg_from(&traj);
    let fused = merge_graphs(&g, &tkg, &AlignmentSet::new()).unwrap();
    let best = score_path(&traj, &path, &g, &embedder()).unwrap();
    let out = render_context(&fused, &traj, &best, &ContextTemplate::default()).unwrap();
    assert!(!out.text.contains(EVIDENCE_LABEL));
    assert!(out.text.contains("a b"));
    assert!(out.text.contains("g0"));
}

#[test]
fn missing_template_slot_is_an_error() {
    match ContextTemplate::new("only {{trajectory}} here") {
        Err(AlignmentError::MissingSlots(missing)) => {
            assert_eq!(missing, vec!["matched_path".to_string(), "evidence".to_string()]);
        }
        other => panic!("expected missing slots, got {other:?}"),
    }
}
