//! Deterministic token-hash embedding provider.
//!
//! Each text becomes a signed bag-of-features vector: tokens are hashed
//! with seeded FNV-1a, the hash picks a dimension index and a sign, and the
//! accumulated vector is L2-normalized. Output depends only on
//! `(text, dim, seed)`, so reruns are byte-identical anywhere.

use super::{Embedder, EmbeddingError, EmbeddingVector};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x1000_0000_01b3;

/// Seeded FNV-1a over raw bytes.
pub fn fnv1a64(seed: u64, bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET ^ seed;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Lowercased whitespace tokens with edge punctuation trimmed; the raw
/// lowercased text when nothing survives (so whitespace-only or pure
/// punctuation inputs still embed deterministically).
fn tokens(text: &str) -> Vec<String> {
    let toks: Vec<String> = text
        .split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect();
    if toks.is_empty() {
        vec![text.to_lowercase()]
    } else {
        toks
    }
}

#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self, EmbeddingError> {
        if dim < 2 {
            return Err(EmbeddingError::InvalidConfig("dim must be >= 2".into()));
        }
        Ok(Self { dim, seed })
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        if text.is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        let mut values = vec![0.0f64; self.dim];
        for token in tokens(text) {
            let h = fnv1a64(self.seed, token.as_bytes());
            let idx = (h % self.dim as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            values[idx] += sign;
        }
        let vector = EmbeddingVector::new(values);
        match vector.normalized() {
            Ok(v) => Ok(v),
            // opposite-signed tokens can cancel to zero; fall back to a
            // basis vector derived from the whole text
            Err(EmbeddingError::ZeroNorm) => {
                let mut values = vec![0.0f64; self.dim];
                let h = fnv1a64(self.seed, text.as_bytes());
                values[(h % self.dim as u64) as usize] = 1.0;
                Ok(EmbeddingVector::new(values))
            }
            Err(e) => Err(e),
        }
    }
}

impl Embedder for HashEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        texts.iter().map(|t| self.embed_text(t)).collect()
    }

    fn dim(&self) -> usize {
        self.dim
    }
}
