//! LRU embedding cache keyed by exact text bytes.
//!
//! Lookups run under a short lock, provider calls run without it, and
//! inserts reacquire the lock; a racing duplicate compute is harmless
//! because providers are pure functions of the text.

use std::collections::HashMap;
use std::sync::Mutex;

use super::{Embedder, EmbeddingError, EmbeddingVector};

struct LruCache {
    slots: HashMap<String, (EmbeddingVector, u64)>,
    capacity: usize,
    tick: u64,
}

impl LruCache {
    fn new(capacity: usize) -> Self {
        Self {
            slots: HashMap::new(),
            capacity: capacity.max(1),
            tick: 0,
        }
    }

    fn get(&mut self, key: &str) -> Option<EmbeddingVector> {
        self.tick += 1;
        let tick = self.tick;
        self.slots.get_mut(key).map(|(v, t)| {
            *t = tick;
            v.clone()
        })
    }

    fn insert(&mut self, key: String, value: EmbeddingVector) {
        self.tick += 1;
        if !self.slots.contains_key(&key) && self.slots.len() >= self.capacity {
            if let Some(oldest) = self
                .slots
                .iter()
                .min_by_key(|(_, (_, t))| *t)
                .map(|(k, _)| k.clone())
            {
                self.slots.remove(&oldest);
            }
        }
        self.slots.insert(key, (value, self.tick));
    }
}

/// Transparent caching layer over any [`Embedder`]: warm and cold calls
/// return element-wise identical vectors.
pub struct CachingEmbedder {
    inner: Box<dyn Embedder>,
    cache: Mutex<LruCache>,
}

impl CachingEmbedder {
    pub fn new(inner: Box<dyn Embedder>, capacity: usize) -> Self {
        Self {
            inner,
            cache: Mutex::new(LruCache::new(capacity)),
        }
    }
}

impl Embedder for CachingEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let mut results: Vec<Option<EmbeddingVector>> = vec![None; texts.len()];
        let mut misses: Vec<&str> = Vec::new();
        {
            let mut cache = self.cache.lock().expect("embedding cache poisoned");
            for (i, text) in texts.iter().enumerate() {
                if let Some(hit) = cache.get(text) {
                    results[i] = Some(hit);
                } else if !misses.contains(text) {
                    misses.push(text);
                }
            }
        }
        if !misses.is_empty() {
            let computed = self.inner.embed(&misses)?;
            if computed.len() != misses.len() {
                return Err(EmbeddingError::Protocol(format!(
                    "provider returned {} vectors for {} texts",
                    computed.len(),
                    misses.len()
                )));
            }
            let mut cache = self.cache.lock().expect("embedding cache poisoned");
            for (text, vector) in misses.iter().zip(&computed) {
                cache.insert(text.to_string(), vector.clone());
            }
            for (i, text) in texts.iter().enumerate() {
                if results[i].is_none() {
                    let pos = misses.iter().position(|m| m == text).expect("miss recorded");
                    results[i] = Some(computed[pos].clone());
                }
            }
        }
        Ok(results.into_iter().map(|r| r.expect("filled")).collect())
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }
}
