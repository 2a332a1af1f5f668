//! HTTP client for a remote embedding service.
//!
//! Protocol: `POST {endpoint}/embed` with `{"texts": [...]}`, response
//! `{"vectors": [[...]], "dim": N}`. Connection failures and 5xx responses
//! are retried a bounded number of times; other failures are hard errors.
//! Vectors are L2-normalized locally.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Embedder, EmbeddingError, EmbeddingVector};

const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
const DEFAULT_MAX_RETRIES: usize = 2;

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

pub struct RemoteEmbedder {
    endpoint: String,
    auth_token: Option<String>,
    dim: usize,
    batch_size: usize,
    max_retries: usize,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(
        endpoint: String,
        auth_token: Option<String>,
        dim: usize,
        batch_size: usize,
    ) -> Result<Self, EmbeddingError> {
        if dim < 2 {
            return Err(EmbeddingError::InvalidConfig("dim must be >= 2".into()));
        }
        if batch_size < 1 {
            return Err(EmbeddingError::InvalidConfig("batch_size must be >= 1".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(DEFAULT_TIMEOUT)
            .build()
            .map_err(|e| EmbeddingError::Provider {
                message: format!("failed to build http client: {e}"),
                retryable: false,
            })?;
        Ok(Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            auth_token,
            dim,
            batch_size,
            max_retries: DEFAULT_MAX_RETRIES,
            client,
        })
    }

    fn post_batch(&self, batch: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let url = format!("{}/embed", self.endpoint);
        let mut last_error = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(100 * attempt as u64));
            }
            let mut request = self.client.post(&url).json(&EmbedRequest { texts: batch });
            if let Some(token) = &self.auth_token {
                request = request.bearer_auth(token);
            }
            let response = match request.send() {
                Ok(r) => r,
                Err(e) => {
                    last_error = format!("request failed: {e}");
                    continue;
                }
            };
            let status = response.status();
            if status.is_server_error() {
                last_error = format!("server error: {status}");
                continue;
            }
            if !status.is_success() {
                return Err(EmbeddingError::Provider {
                    message: format!("embed endpoint returned {status}"),
                    retryable: false,
                });
            }
            let body: EmbedResponse = response.json().map_err(|e| {
                EmbeddingError::Protocol(format!("malformed embed response: {e}"))
            })?;
            return self.validate_body(batch.len(), body);
        }
        Err(EmbeddingError::Provider {
            message: format!(
                "embed endpoint failed after {} attempts: {last_error}",
                self.max_retries + 1
            ),
            retryable: true,
        })
    }

    fn validate_body(
        &self,
        expected_count: usize,
        body: EmbedResponse,
    ) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        if body.dim != self.dim {
            return Err(EmbeddingError::Protocol(format!(
                "remote dim {} does not match configured dim {}",
                body.dim, self.dim
            )));
        }
        if body.vectors.len() != expected_count {
            return Err(EmbeddingError::Protocol(format!(
                "expected {expected_count} vectors, got {}",
                body.vectors.len()
            )));
        }
        body.vectors
            .into_iter()
            .map(|values| {
                if values.len() != self.dim {
                    return Err(EmbeddingError::Protocol(format!(
                        "vector length {} does not match dim {}",
                        values.len(),
                        self.dim
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(EmbeddingError::Protocol("non-finite vector value".into()));
                }
                EmbeddingVector::new(values)
                    .normalized()
                    .map_err(|_| EmbeddingError::Protocol("remote returned a zero vector".into()))
            })
            .collect()
    }
}

impl Embedder for RemoteEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        if texts.iter().any(|t| t.is_empty()) {
            return Err(EmbeddingError::EmptyText);
        }
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.batch_size) {
            out.extend(self.post_batch(batch)?);
        }
        Ok(out)
    }

    fn dim(&self) -> usize {
        self.dim
    }
}
