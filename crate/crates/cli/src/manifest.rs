//! Run manifest kept next to the stage artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use fishbone_core::embedding::ProviderStats;
use fishbone_core::summarizer::SummarizerStats;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::fsutil::write_atomic;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Canonical stage order.
pub const STAGES: [&str; 8] = [
    "ingest", "segment", "train", "eval", "classify", "cluster", "build", "render",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderCalls {
    pub embedding: ProviderStats,
    pub summarizer: SummarizerStats,
}

impl ProviderCalls {
    /// Counts accumulated between two snapshots of the same providers.
    pub fn since(&self, earlier: &ProviderCalls) -> ProviderCalls {
        let (e, s) = (&self.embedding, &self.summarizer);
        let (e0, s0) = (&earlier.embedding, &earlier.summarizer);
        ProviderCalls {
            embedding: ProviderStats {
                remote_calls: e.remote_calls - e0.remote_calls,
                retries: e.retries - e0.retries,
                cache_hits: e.cache_hits - e0.cache_hits,
                cache_misses: e.cache_misses - e0.cache_misses,
            },
            summarizer: SummarizerStats {
                remote_calls: s.remote_calls - s0.remote_calls,
                retries: s.retries - s0.retries,
                cache_hits: s.cache_hits - s0.cache_hits,
                fallbacks: s.fallbacks - s0.fallbacks,
            },
        }
    }

    fn add(&mut self, o: &ProviderCalls) {
        let (e, s) = (&mut self.embedding, &mut self.summarizer);
        e.remote_calls += o.embedding.remote_calls;
        e.retries += o.embedding.retries;
        e.cache_hits += o.embedding.cache_hits;
        e.cache_misses += o.embedding.cache_misses;
        s.remote_calls += o.summarizer.remote_calls;
        s.retries += o.summarizer.retries;
        s.cache_hits += o.summarizer.cache_hits;
        s.fallbacks += o.summarizer.fallbacks;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub millis: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub provider_calls: ProviderCalls,
    /// Artifact file name (relative to the output directory) to SHA-256.
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub stages: Vec<StageRecord>,
    /// All stage warnings, in stage order.
    pub warnings: Vec<String>,
    /// Totals over all stages.
    pub provider_calls: ProviderCalls,
    /// Digest of every artifact currently recorded.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.into(),
            stages: Vec::new(),
            warnings: Vec::new(),
            provider_calls: ProviderCalls::default(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn read(dir: &Path) -> Result<Option<Self>, CliError> {
        let path = dir.join(MANIFEST_FILE);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(CliError::io(&path, e)),
        }
    }

    /// The existing manifest when it was written under the same config,
    /// otherwise a fresh one.
    pub fn resume(dir: &Path, config_hash: &str) -> Result<Self, CliError> {
        Ok(match Self::read(dir)? {
            Some(m) if m.config_hash == config_hash => m,
            Some(_) => {
                log::info!("config changed since the last run; starting a new manifest");
                Self::new(config_hash)
            }
            None => Self::new(config_hash),
        })
    }

    /// Replaces the record of the same stage and refreshes the totals.
    pub fn record(&mut self, stage: StageRecord) {
        self.stages.retain(|s| s.name != stage.name);
        self.stages.push(stage);
        let rank = |name: &str| STAGES.iter().position(|s| *s == name).unwrap_or(STAGES.len());
        self.stages.sort_by_key(|s| rank(&s.name));
        self.warnings = self.stages.iter().flat_map(|s| s.warnings.iter().cloned()).collect();
        self.provider_calls = ProviderCalls::default();
        self.outputs.clear();
        for s in &self.stages {
            self.provider_calls.add(&s.provider_calls);
            self.outputs
                .extend(s.outputs.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
    }
}
