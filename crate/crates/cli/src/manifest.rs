//! Per-run manifest: config hash, input digests, tool version, stage
//! timings, and accumulated warnings. Written once at the end of a run.
//!
//! Timings are wall-clock and therefore vary between runs; determinism
//! checks on the output tree must exclude this one file.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use carepath_core::embedding::hash::fnv1a64;
use serde::Serialize;

use crate::config::{io_error, ConfigError, PipelineConfig};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: u128,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub input_digests: BTreeMap<String, String>,
    pub stages: Vec<StageTiming>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn new(config: &PipelineConfig) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.config_hash(),
            input_digests: BTreeMap::new(),
            stages: Vec::new(),
            warnings: Vec::new(),
        }
    }

    /// Record the fnv64 digest of an input file.
    pub fn record_input(&mut self, path: &Path) -> Result<(), ConfigError> {
        let bytes = std::fs::read(path)
            .map_err(io_error(format!("digesting input {}", path.display())))?;
        self.input_digests.insert(
            path.display().to_string(),
            format!("fnv64:{:016x}", fnv1a64(0, &bytes)),
        );
        Ok(())
    }

    pub fn time_stage<T, E>(
        &mut self,
        stage: &str,
        run: impl FnOnce(&mut Self) -> Result<T, E>,
    ) -> Result<T, E> {
        let start = Instant::now();
        let result = run(self);
        self.stages.push(StageTiming {
            stage: stage.to_string(),
            millis: start.elapsed().as_millis(),
        });
        result
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    /// Write `manifest.json` under the output directory.
    pub fn write(&self, out_dir: &Path) -> Result<(), ConfigError> {
        let path = out_dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, json)
            .map_err(io_error(format!("writing manifest {}", path.display())))
    }
}
