//! Judge providers: deterministic stubs for offline runs and an HTTP
//! client for real judge endpoints.
//!
//! Protocol: `POST {endpoint}/judge` with `{"rubric": text, "item": {...}}`,
//! response `{"scores": {"factual": n, "completeness": n, "soundness": n,
//! "actionability": n}}`. Raw replies are validated by the caller; an
//! out-of-range score excludes that judge from the ensemble.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::EvalItem;
use crate::embedding::hash::fnv1a64;
use crate::provider::ProviderError;

/// Unvalidated judge reply; values may be out of range.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RawScores {
    pub factual: i64,
    pub completeness: i64,
    pub soundness: i64,
    pub actionability: i64,
}

pub trait JudgeProvider: Send + Sync {
    fn id(&self) -> &str;
    fn judge(&self, rubric: &str, item: &EvalItem) -> Result<RawScores, ProviderError>;
}

#[derive(Debug, Clone)]
enum StubMode {
    Fixed(RawScores),
    Seeded(u64),
}

/// Deterministic stub judge: either a fixed score vector or scores derived
/// from a seed and the item id.
#[derive(Debug, Clone)]
pub struct StubJudge {
    id: String,
    mode: StubMode,
}

impl StubJudge {
    pub fn fixed(id: impl Into<String>, scores: RawScores) -> Self {
        Self {
            id: id.into(),
            mode: StubMode::Fixed(scores),
        }
    }

    pub fn seeded(id: impl Into<String>, seed: u64) -> Self {
        Self {
            id: id.into(),
            mode: StubMode::Seeded(seed),
        }
    }
}

impl JudgeProvider for StubJudge {
    fn id(&self) -> &str {
        &self.id
    }

    fn judge(&self, _rubric: &str, item: &EvalItem) -> Result<RawScores, ProviderError> {
        match &self.mode {
            StubMode::Fixed(scores) => Ok(*scores),
            StubMode::Seeded(seed) => {
                let score = |dim: &str| -> i64 {
                    let key = format!("{}:{dim}", item.item_id);
                    (fnv1a64(*seed, key.as_bytes()) % 5) as i64 + 1
                };
                Ok(RawScores {
                    factual: score("factual"),
                    completeness: score("completeness"),
                    soundness: score("soundness"),
                    actionability: score("actionability"),
                })
            }
        }
    }
}

#[derive(Serialize)]
struct JudgeHttpRequest<'a> {
    rubric: &'a str,
    item: &'a EvalItem,
}

#[derive(Deserialize)]
struct JudgeHttpResponse {
    scores: RawScores,
}

pub struct HttpJudge {
    id: String,
    endpoint: String,
    auth_token: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpJudge {
    pub fn new(
        id: impl Into<String>,
        endpoint: String,
        auth_token: Option<String>,
    ) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| ProviderError::new("judge", format!("http client: {e}")))?;
        Ok(Self {
            id: id.into(),
            endpoint: endpoint.trim_end_matches('/').to_string(),
            auth_token,
            client,
        })
    }
}

impl JudgeProvider for HttpJudge {
    fn id(&self) -> &str {
        &self.id
    }

    fn judge(&self, rubric: &str, item: &EvalItem) -> Result<RawScores, ProviderError> {
        let url = format!("{}/judge", self.endpoint);
        let mut request = self.client.post(&url).json(&JudgeHttpRequest { rubric, item });
        if let Some(token) = &self.auth_token {
            request = request.bearer_auth(token);
        }
        let response = request
            .send()
            .map_err(|e| ProviderError::retryable("judge", format!("request failed: {e}")))?;
        let status = response.status();
        if !status.is_success() {
            return Err(ProviderError::new(
                "judge",
                format!("judge endpoint returned {status}"),
            ));
        }
        let body: JudgeHttpResponse = response
            .json()
            .map_err(|e| ProviderError::new("judge", format!("malformed response: {e}")))?;
        Ok(body.scores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::TaskKind;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    fn item(id: &str) -> EvalItem {
        EvalItem {
            item_id: id.into(),
            task: TaskKind::ClinicalSummary,
            prompt_context: "ctx".into(),
            candidate_text: "text".into(),
            token_count: 10,
        }
    }

    #[test]
    fn seeded_stub_is_deterministic_and_in_range() {
        let judge = StubJudge::seeded("j1", 9);
        let a = judge.judge("rubric", &item("item-01")).unwrap();
        let b = judge.judge("rubric", &item("item-01")).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        for v in [a.factual, a.completeness, a.soundness, a.actionability] {
            assert!((1..=5).contains(&v));
        }
        let c = judge.judge("rubric", &item("item-02")).unwrap();
        let differs = [
            (a.factual, c.factual),
            (a.completeness, c.completeness),
            (a.soundness, c.soundness),
            (a.actionability, c.actionability),
        ]
        .iter()
        .any(|(x, y)| x != y);
        assert!(differs, "different items should usually score differently");
    }

    #[test]
    fn http_judge_round_trip() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut content_length = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line.trim_end().is_empty() {
                    break;
                }
                if let Some(v) = line.to_lowercase().strip_prefix("content-length:") {
                    content_length = v.trim().parse().unwrap();
                }
            }
            let mut buf = vec![0u8; content_length];
            reader.read_exact(&mut buf).unwrap();
            let request: serde_json::Value = serde_json::from_slice(&buf).unwrap();
            assert_eq!(request["item"]["item_id"], "item-01");
            assert_eq!(request["rubric"], "the rubric");
            let body = r#"{"scores":{"factual":4,"completeness":3,"soundness":5,"actionability":2}}"#;
            let response = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(response.as_bytes()).unwrap();
        });
        let judge = HttpJudge::new("j1", format!("http://{addr}"), None).unwrap();
        let scores = judge.judge("the rubric", &item("item-01")).unwrap();
        server.join().unwrap();
        assert_eq!(
            (scores.factual, scores.completeness, scores.soundness, scores.actionability),
            (4, 3, 5, 2)
        );
    }
}
