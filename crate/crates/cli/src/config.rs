//! Pipeline configuration: a flat `key = value` document plus CLI flag
//! overrides (flags win). Relative paths resolve against the config file's
//! directory so a fixture bundle stays relocatable.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use carepath_core::alignment::{BootstrapConfig, ExpansionScope};
use carepath_core::corpus::ContextCaps;
use carepath_core::embedding::{hash::fnv1a64, EmbedderKind, EmbeddingProviderConfig};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {0}: expected `key = value`, got {1:?}")]
    Malformed(usize, String),
    #[error("config key {key:?}: {message}")]
    Invalid { key: String, message: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("required input {role} not found at {path}")]
    MissingInput { role: &'static str, path: String },
    #[error("missing required config key {0:?}")]
    MissingKey(&'static str),
    #[error("{context}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

pub fn io_error(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> ConfigError {
    let context = context.into();
    move |source| ConfigError::Io { context, source }
}

/// Resolved pipeline configuration.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub corpus: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub guideline: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub items: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
    pub template: Option<PathBuf>,
    pub rubric: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub context_token_cap: usize,
    pub output_token_cap: usize,
    pub summary_ratio: f64,
    pub embedder: EmbedderKind,
    pub embed_dim: usize,
    pub embed_batch_size: usize,
    pub embed_cache_capacity: usize,
    pub alpha: f64,
    pub theta: f64,
    pub iterations: usize,
    pub top_n: usize,
    pub max_depth: usize,
    pub max_paths: usize,
    pub parallelism: usize,
    pub stub_reranker: bool,
    pub stub_judges: bool,
    pub stub_judge_count: usize,
    /// When set, stub judges return this fixed score on every dimension
    /// instead of seeded per-item scores.
    pub stub_judge_fixed: Option<i64>,
    pub whole_graph_expansion: bool,
    pub dump_events: bool,
    pub dump_tkg: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            catalog: None,
            guideline: None,
            lexicon: None,
            items: None,
            ratings: None,
            template: None,
            rubric: None,
            out: PathBuf::from("out"),
            seed: 42,
            context_token_cap: 20_000,
            output_token_cap: 4_096,
            summary_ratio: 0.8,
            embedder: EmbedderKind::Hash,
            embed_dim: 384,
            embed_batch_size: 32,
            embed_cache_capacity: 4096,
            alpha: 0.5,
            theta: 0.7,
            iterations: 10,
            top_n: 5,
            max_depth: 12,
            max_paths: 10_000,
            parallelism: 4,
            stub_reranker: true,
            stub_judges: true,
            stub_judge_count: 3,
            stub_judge_fixed: None,
            whole_graph_expansion: false,
            dump_events: true,
            dump_tkg: true,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Invalid {
        key: key.to_string(),
        message: format!("cannot parse {value:?}"),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::Invalid {
            key: key.to_string(),
            message: format!("expected a boolean, got {value:?}"),
        }),
    }
}

impl PipelineConfig {
    /// Parse a config document. Lines are `key = value`; `#` starts a
    /// comment; values may be double-quoted.
    pub fn from_str_with_base(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Malformed(idx + 1, raw_line.to_string()))?;
            let key = key.trim();
            let mut value = value.trim();
            if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
                value = &value[1..value.len() - 1];
            }
            let path = |v: &str| -> PathBuf {
                let p = PathBuf::from(v);
                if p.is_absolute() {
                    p
                } else {
                    base.join(p)
                }
            };
            match key {
                "corpus" => config.corpus = Some(path(value)),
                "catalog" => config.catalog = Some(path(value)),
                "guideline" => config.guideline = Some(path(value)),
                "lexicon" => config.lexicon = Some(path(value)),
                "items" => config.items = Some(path(value)),
                "ratings" => config.ratings = Some(path(value)),
                "template" => config.template = Some(path(value)),
                "rubric" => config.rubric = Some(path(value)),
                "out" => config.out = path(value),
                "seed" => config.seed = parse_value(key, value)?,
                "context_token_cap" => config.context_token_cap = parse_value(key, value)?,
                "output_token_cap" => config.output_token_cap = parse_value(key, value)?,
                "summary_ratio" => config.summary_ratio = parse_value(key, value)?,
                "embedder" => {
                    config.embedder = match value {
                        "hash" => EmbedderKind::Hash,
                        "remote" => EmbedderKind::Remote,
                        other => {
                            return Err(ConfigError::Invalid {
                                key: key.to_string(),
                                message: format!("expected hash|remote, got {other:?}"),
                            })
                        }
                    }
                }
                "embed_dim" => config.embed_dim = parse_value(key, value)?,
                "embed_batch_size" => config.embed_batch_size = parse_value(key, value)?,
                "embed_cache_capacity" => config.embed_cache_capacity = parse_value(key, value)?,
                "alpha" => config.alpha = parse_value(key, value)?,
                "theta" => config.theta = parse_value(key, value)?,
                "iterations" => config.iterations = parse_value(key, value)?,
                "top_n" => config.top_n = parse_value(key, value)?,
                "max_depth" => config.max_depth = parse_value(key, value)?,
                "max_paths" => config.max_paths = parse_value(key, value)?,
                "parallelism" => config.parallelism = parse_value(key, value)?,
                "stub_reranker" => config.stub_reranker = parse_bool(key, value)?,
                "stub_judges" => config.stub_judges = parse_bool(key, value)?,
                "stub_judge_count" => config.stub_judge_count = parse_value(key, value)?,
                "stub_judge_fixed" => config.stub_judge_fixed = Some(parse_value(key, value)?),
                "whole_graph_expansion" => {
                    config.whole_graph_expansion = parse_bool(key, value)?
                }
                "dump_events" => config.dump_events = parse_bool(key, value)?,
                "dump_tkg" => config.dump_tkg = parse_bool(key, value)?,
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(io_error(format!("reading config {}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_str_with_base(&text, base)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, message: &str| {
            Err(ConfigError::Invalid {
                key: key.to_string(),
                message: message.to_string(),
            })
        };
        if self.context_token_cap == 0 {
            return invalid("context_token_cap", "must be positive");
        }
        if self.output_token_cap == 0 {
            return invalid("output_token_cap", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.summary_ratio) {
            return invalid("summary_ratio", "must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return invalid("alpha", "must be in [0, 1]");
        }
        if self.iterations == 0 {
            return invalid("iterations", "must be >= 1");
        }
        if self.top_n == 0 {
            return invalid("top_n", "must be >= 1");
        }
        if self.max_depth == 0 || self.max_paths == 0 {
            return invalid("max_depth/max_paths", "must be >= 1");
        }
        if self.parallelism == 0 {
            return invalid("parallelism", "must be >= 1");
        }
        if self.stub_judges && self.stub_judge_count == 0 {
            return invalid("stub_judge_count", "must be >= 1");
        }
        Ok(())
    }

    /// Require that a configured input exists on disk.
    pub fn require(
        &self,
        role: &'static str,
        path: &Option<PathBuf>,
    ) -> Result<PathBuf, ConfigError> {
        let path = path.as_ref().ok_or(ConfigError::MissingKey(role))?;
        if !path.exists() {
            return Err(ConfigError::MissingInput {
                role,
                path: path.display().to_string(),
            });
        }
        Ok(path.clone())
    }

    pub fn context_caps(&self) -> ContextCaps {
        ContextCaps {
            context_tokens: self.context_token_cap,
            summary_ratio: self.summary_ratio,
        }
    }

    pub fn embedding_config(&self) -> EmbeddingProviderConfig {
        EmbeddingProviderConfig {
            kind: self.embedder,
            dim: self.embed_dim,
            seed: self.seed,
            endpoint: std::env::var("EMBED_ENDPOINT").ok(),
            auth_token: std::env::var("EMBED_TOKEN").ok(),
            batch_size: self.embed_batch_size,
            cache_capacity: self.embed_cache_capacity,
        }
    }

    pub fn bootstrap_config(&self) -> BootstrapConfig {
        BootstrapConfig {
            alpha: self.alpha,
            theta: self.theta,
            max_iterations: self.iterations,
            top_n: self.top_n,
            scope: if self.whole_graph_expansion {
                ExpansionScope::WholeGraph
            } else {
                ExpansionScope::BestPath
            },
        }
    }

    /// Canonical key/value view; the hash is stable under any key order in
    /// the source document.
    fn canonical(&self) -> BTreeMap<&'static str, String> {
        let path_str =
            |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut map = BTreeMap::new();
        map.insert("corpus", path_str(&self.corpus));
        map.insert("catalog", path_str(&self.catalog));
        map.insert("guideline", path_str(&self.guideline));
        map.insert("lexicon", path_str(&self.lexicon));
        map.insert("items", path_str(&self.items));
        map.insert("ratings", path_str(&self.ratings));
        map.insert("template", path_str(&self.template));
        map.insert("rubric", path_str(&self.rubric));
        map.insert("out", self.out.display().to_string());
        map.insert("seed", self.seed.to_string());
        map.insert("context_token_cap", self.context_token_cap.to_string());
        map.insert("output_token_cap", self.output_token_cap.to_string());
        map.insert("summary_ratio", format!("{}", self.summary_ratio));
        map.insert(
            "embedder",
            match self.embedder {
                EmbedderKind::Hash => "hash".to_string(),
                EmbedderKind::Remote => "remote".to_string(),
            },
        );
        map.insert("embed_dim", self.embed_dim.to_string());
        map.insert("embed_batch_size", self.embed_batch_size.to_string());
        map.insert("embed_cache_capacity", self.embed_cache_capacity.to_string());
        map.insert("alpha", format!("{}", self.alpha));
        map.insert("theta", format!("{}", self.theta));
        map.insert("iterations", self.iterations.to_string());
        map.insert("top_n", self.top_n.to_string());
        map.insert("max_depth", self.max_depth.to_string());
        map.insert("max_paths", self.max_paths.to_string());
        map.insert("parallelism", self.parallelism.to_string());
        map.insert("stub_reranker", self.stub_reranker.to_string());
        map.insert("stub_judges", self.stub_judges.to_string());
        map.insert("stub_judge_count", self.stub_judge_count.to_string());
        map.insert(
            "stub_judge_fixed",
            self.stub_judge_fixed.map(|v| v.to_string()).unwrap_or_default(),
        );
        map.insert("whole_graph_expansion", self.whole_graph_expansion.to_string());
        map.insert("dump_events", self.dump_events.to_string());
        map.insert("dump_tkg", self.dump_tkg.to_string());
        map
    }

    pub fn config_hash(&self) -> String {
        let mut doc = String::new();
        for (key, value) in self.canonical() {
            doc.push_str(key);
            doc.push('=');
            doc.push_str(&value);
            doc.push('\n');
        }
        format!("{:016x}", fnv1a64(0, doc.as_bytes()))
    }
}
