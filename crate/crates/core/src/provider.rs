//! Shared error type for pluggable providers (summarizer, extractor,
//! embedder, reranker, judge).

use thiserror::Error;

/// Failure reported by a provider implementation, tagged with the pipeline
/// stage it came from so orchestration errors stay attributable.
#[derive(Debug, Clone, Error)]
#[error("provider error in {stage}: {message}")]
pub struct ProviderError {
    pub stage: String,
    pub message: String,
    /// Whether retrying the same call could plausibly succeed.
    pub retryable: bool,
}

impl ProviderError {
    pub fn new(stage: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            stage: stage.into(),
            message: message.into(),
            retryable: false,
        }
    }

    pub fn retryable(stage: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            stage: stage.into(),
            message: message.into(),
            retryable: true,
        }
    }
}
