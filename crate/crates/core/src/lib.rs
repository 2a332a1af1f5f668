//! Core engine for turning longitudinal clinical documents into temporal
//! knowledge graphs, aligning patient trajectories with normative guideline
//! paths, and scoring generated clinical text with a judge ensemble.
//!
//! The pipeline stages map onto the top-level modules:
//!
//! ```text
//! corpus     parse documents, condense history, extract clinical events
//! tkg        instantiate the patient temporal knowledge graph, derive trajectories
//! guideline  load the normative guideline graph, enumerate candidate paths
//! embedding  text embeddings (deterministic hash provider or remote service) + cosine
//! alignment  trajectory/path scoring, reranking, bootstrapped expansion, graph fusion
//! evaluation rubric judging, rank correlation, length-stratified reporting
//! ```
//!
//! Every built-in provider is deterministic: the same input bytes, seed, and
//! configuration produce byte-identical outputs. Remote providers (embedding,
//! reranking, judging) speak small JSON-over-HTTP protocols and can be swapped
//! in without touching the pipeline logic.

pub mod alignment;
pub mod corpus;
pub mod embedding;
pub mod evaluation;
pub mod guideline;
pub mod provider;
pub mod tkg;

pub use provider::ProviderError;
