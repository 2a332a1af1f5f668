//! Clinical-reasoner reranking of scored candidate paths.
//!
//! The provider receives the trajectory, the candidate step sequences, and
//! their matching scores, and replies with a permutation of candidate
//! indices. Anything that is not a permutation falls back to the input
//! order with a warning; the output is always a permutation of the input.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{AlignmentError, ScoredPath};
use crate::provider::ProviderError;
use crate::tkg::Trajectory;

#[derive(Debug, Clone, Serialize)]
pub struct RerankCandidate {
    pub index: usize,
    pub steps: Vec<String>,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RerankRequest {
    pub trajectory: Vec<String>,
    pub candidates: Vec<RerankCandidate>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RerankResponse {
    pub order: Vec<usize>,
}

pub trait RerankerProvider: Send + Sync {
    fn rerank(&self, request: &RerankRequest) -> Result<RerankResponse, ProviderError>;
}

/// Identity reranker: returns the input order unchanged.
#[derive(Debug, Default, Clone, Copy)]
pub struct StubReranker;

impl RerankerProvider for StubReranker {
    fn rerank(&self, request: &RerankRequest) -> Result<RerankResponse, ProviderError> {
        Ok(RerankResponse {
            order: (0..request.candidates.len()).collect(),
        })
    }
}

/// HTTP reranker: `POST {endpoint}/rerank` with the request JSON, response
/// `{"order": [indices]}`.
pub struct HttpReranker {
    endpoint: String,
    auth_token: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpReranker {
    pub fn new(endpoint: String, auth_token: Option<String>) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| ProviderError::new("reranker", format!("http client: {e}")))?;
        Ok(Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            auth_token,
            client,
        })
    }
}

impl RerankerProvider for HttpReranker {
    fn rerank(&self, request: &RerankRequest) -> Result<RerankResponse, ProviderError> {
        let url = format!("{}/rerank", self.endpoint);
        let mut req = self.client.post(&url).json(request);
        if let Some(token) = &self.auth_token {
            req = req.bearer_auth(token);
        }
        let response = req
            .send()
            .map_err(|e| ProviderError::retryable("reranker", format!("request failed: {e}")))?;
        let status = response.status();
        if !status.is_success() {
            return Err(ProviderError::new(
                "reranker",
                format!("rerank endpoint returned {status}"),
            ));
        }
        response
            .json()
            .map_err(|e| ProviderError::new("reranker", format!("malformed response: {e}")))
    }
}

#[derive(Debug, Clone)]
pub struct RerankOutcome {
    pub ranked: Vec<ScoredPath>,
    /// Present when the provider failed or replied with a non-permutation
    /// and the input order was kept.
    pub warning: Option<String>,
}

fn is_permutation(order: &[usize], n: usize) -> bool {
    if order.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &i in order {
        if i >= n || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}

/// Rerank scored candidates through a provider. The output is validated to
/// be a permutation of the input; provider failure or an invalid reply
/// falls back to the input order with a warning.
pub fn rerank(
    trajectory: &Trajectory,
    scored: &[ScoredPath],
    provider: &dyn RerankerProvider,
) -> Result<RerankOutcome, AlignmentError> {
    if scored.is_empty() {
        return Err(AlignmentError::NoCandidates);
    }
    let request = RerankRequest {
        trajectory: trajectory
            .events
            .iter()
            .map(|e| e.description.clone())
            .collect(),
        candidates: scored
            .iter()
            .enumerate()
            .map(|(index, sp)| RerankCandidate {
                index,
                steps: sp.path.steps.clone(),
                score: sp.score,
            })
            .collect(),
    };
    match provider.rerank(&request) {
        Ok(response) if is_permutation(&response.order, scored.len()) => Ok(RerankOutcome {
            ranked: response.order.iter().map(|&i| scored[i].clone()).collect(),
            warning: None,
        }),
        Ok(response) => Ok(RerankOutcome {
            ranked: scored.to_vec(),
            warning: Some(format!(
                "reranker reply {:?} is not a permutation of 0..{}; kept input order",
                response.order,
                scored.len()
            )),
        }),
        Err(e) => Ok(RerankOutcome {
            ranked: scored.to_vec(),
            warning: Some(format!("reranker failed ({e}); kept input order")),
        }),
    }
}
