//! Text embeddings and cosine similarity.
//!
//! Two providers implement [`Embedder`]: a deterministic token-hash
//! projection ([`hash::HashEmbedder`]) that makes the whole pipeline
//! testable offline, and an HTTP client for a remote embedding service
//! ([`remote::RemoteEmbedder`]). Both are L2-normalized at the boundary so
//! cosine similarity reduces to a dot product. [`cache::CachingEmbedder`]
//! adds an LRU layer keyed on exact text bytes.

pub mod cache;
pub mod hash;
pub mod remote;

use std::sync::Arc;

use thiserror::Error;

pub use cache::CachingEmbedder;
pub use hash::HashEmbedder;
pub use remote::RemoteEmbedder;

/// Cosine similarity threshold used downstream for seeding and expansion.
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.7;

pub const DEFAULT_DIM: usize = 384;
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_CACHE_CAPACITY: usize = 4096;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("cannot embed an empty text")]
    EmptyText,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("cosine similarity is undefined for a zero-norm vector")]
    ZeroNorm,
    #[error("invalid embedding configuration: {0}")]
    InvalidConfig(String),
    #[error("embedding protocol error: {0}")]
    Protocol(String),
    #[error("embedding provider failed{}: {message}", if *.retryable { " (retryable)" } else { "" })]
    Provider { message: String, retryable: bool },
}

/// Fixed-length real vector; all values finite.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scale to unit L2 norm. Zero-norm input is an error.
    pub fn normalized(mut self) -> Result<Self, EmbeddingError> {
        let norm = self.l2_norm();
        if norm == 0.0 {
            return Err(EmbeddingError::ZeroNorm);
        }
        for v in &mut self.values {
            *v /= norm;
        }
        Ok(self)
    }
}

/// Cosine similarity, clamped to [-1, 1] against rounding.
///
/// The denominator is `sqrt(|u|^2 * |v|^2)` with the same accumulation
/// order as the numerator, which makes `cosine_sim(x, x)` exactly 1.0.
pub fn cosine_sim(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if u.dim() != v.dim() {
        return Err(EmbeddingError::DimMismatch {
            expected: u.dim(),
            got: v.dim(),
        });
    }
    let mut dot = 0.0f64;
    let mut norm_u = 0.0f64;
    let mut norm_v = 0.0f64;
    for (a, b) in u.values.iter().zip(&v.values) {
        dot += a * b;
        norm_u += a * a;
        norm_v += b * b;
    }
    if norm_u == 0.0 || norm_v == 0.0 {
        return Err(EmbeddingError::ZeroNorm);
    }
    Ok((dot / (norm_u * norm_v).sqrt()).clamp(-1.0, 1.0))
}

/// Text embedding provider. `embed` is order-preserving: one vector per
/// input text. Implementations must be safe for concurrent calls.
pub trait Embedder: Send + Sync {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError>;

    fn dim(&self) -> usize;

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let mut out = self.embed(&[text])?;
        out.pop().ok_or_else(|| {
            EmbeddingError::Protocol("provider returned no vector for one text".into())
        })
    }
}

impl<T: Embedder + ?Sized> Embedder for &T {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        (**self).embed(texts)
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbedderKind {
    Hash,
    Remote,
}

/// Provider configuration; `build` assembles the provider behind the LRU
/// cache.
#[derive(Debug, Clone)]
pub struct EmbeddingProviderConfig {
    pub kind: EmbedderKind,
    pub dim: usize,
    pub seed: u64,
    pub endpoint: Option<String>,
    pub auth_token: Option<String>,
    pub batch_size: usize,
    pub cache_capacity: usize,
}

impl Default for EmbeddingProviderConfig {
    fn default() -> Self {
        Self {
            kind: EmbedderKind::Hash,
            dim: DEFAULT_DIM,
            seed: 0,
            endpoint: None,
            auth_token: None,
            batch_size: DEFAULT_BATCH_SIZE,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
        }
    }
}

impl EmbeddingProviderConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dim < 2 {
            return Err(EmbeddingError::InvalidConfig("dim must be >= 2".into()));
        }
        if self.batch_size < 1 {
            return Err(EmbeddingError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.kind == EmbedderKind::Remote && self.endpoint.is_none() {
            return Err(EmbeddingError::InvalidConfig(
                "remote embedder requires an endpoint".into(),
            ));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Arc<dyn Embedder>, EmbeddingError> {
        self.validate()?;
        let inner: Box<dyn Embedder> = match self.kind {
            EmbedderKind::Hash => Box::new(HashEmbedder::new(self.dim, self.seed)?),
            EmbedderKind::Remote => Box::new(RemoteEmbedder::new(
                self.endpoint.clone().expect("validated"),
                self.auth_token.clone(),
                self.dim,
                self.batch_size,
            )?),
        };
        Ok(Arc::new(CachingEmbedder::new(inner, self.cache_capacity)))
    }
}
