//! Sentence embedding providers.
//!
//! Every provider emits unit-norm vectors of a fixed dimension. Two
//! implementations ship here: a deterministic feature-hashing embedder and a
//! client for an HTTP embedding service. [`CachedEmbedder`] wraps either one
//! with an on-disk cache.

mod cache;
mod hashing;
mod remote;

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use cache::CachedEmbedder;
pub use hashing::{embed_hashing, tokenize, HashingEmbedder, HASHING_PROVIDER_ID};
pub use remote::RemoteEmbedder;

pub const MIN_DIMENSION: usize = 8;
pub const DEFAULT_HASHING_DIMENSION: usize = 256;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("invalid embedding configuration: {0}")]
    InvalidConfig(String),
    #[error("environment variable {0} holding the embedding token is not set")]
    MissingToken(String),
    #[error("embedding request for batch {batch_index} failed: {message}")]
    Provider { batch_index: usize, message: String },
    #[error("provider returned dimension {got}, configured {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding cache I/O: {0}")]
    Cache(#[from] std::io::Error),
}

/// A unit-norm sentence vector.
///
/// Values are stored as `f32`, which is also the on-disk cache format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f32>,
    provider_id: String,
    /// Set when the input had no tokens and the vector is the fallback `e_0`.
    #[serde(default)]
    degenerate: bool,
}

impl EmbeddingVector {
    /// L2-normalizes `raw`. A zero (or non-finite) input becomes the basis
    /// vector `e_0` flagged as degenerate.
    pub fn normalized(raw: &[f64], provider_id: impl Into<String>) -> Self {
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Self::degenerate(raw.len(), provider_id);
        }
        Self {
            values: raw.iter().map(|v| (v / norm) as f32).collect(),
            provider_id: provider_id.into(),
            degenerate: false,
        }
    }

    pub fn degenerate(dimension: usize, provider_id: impl Into<String>) -> Self {
        let mut values = vec![0.0f32; dimension];
        if let Some(first) = values.first_mut() {
            *first = 1.0;
        }
        Self {
            values,
            provider_id: provider_id.into(),
            degenerate: true,
        }
    }

    /// Wraps already-normalized values without touching them.
    pub(crate) fn from_raw_parts(values: Vec<f32>, provider_id: String, degenerate: bool) -> Self {
        Self {
            values,
            provider_id,
            degenerate,
        }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Values widened (or narrowed) to the requested scalar type.
    pub fn to_scalars<T: Scalar>(&self) -> Vec<T> {
        self.values.iter().map(|&v| T::lit(v as f64)).collect()
    }

    /// Normalized mean of several vectors; used to fold a paper's prelude
    /// sentences into one clusterable point.
    pub fn mean(vectors: &[EmbeddingVector]) -> Option<EmbeddingVector> {
        let first = vectors.first()?;
        let mut acc = vec![0.0f64; first.dimension()];
        for v in vectors {
            for (a, &x) in acc.iter_mut().zip(&v.values) {
                *a += x as f64;
            }
        }
        Some(Self::normalized(&acc, first.provider_id.clone()))
    }
}

/// Call counters reported in run manifests.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderStats {
    pub remote_calls: usize,
    pub retries: usize,
    pub cache_hits: usize,
    pub cache_misses: usize,
}

#[derive(Debug, Default)]
pub(crate) struct AtomicStats {
    pub remote_calls: AtomicUsize,
    pub retries: AtomicUsize,
    pub cache_hits: AtomicUsize,
    pub cache_misses: AtomicUsize,
}

impl AtomicStats {
    pub fn bump(counter: &AtomicUsize) {
        counter.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> ProviderStats {
        ProviderStats {
            remote_calls: self.remote_calls.load(Ordering::Relaxed),
            retries: self.retries.load(Ordering::Relaxed),
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
            cache_misses: self.cache_misses.load(Ordering::Relaxed),
        }
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn provider_id(&self) -> &str;

    fn dimension(&self) -> usize;

    /// Embeds a batch; output order matches input order.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut out = self.embed_batch(&[text])?;
        Ok(out.pop().expect("one vector per input"))
    }

    fn stats(&self) -> ProviderStats {
        ProviderStats::default()
    }

    /// Non-fatal problems seen so far (corrupt cache entries and the like).
    fn warnings(&self) -> Vec<String> {
        Vec::new()
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn provider_id(&self) -> &str {
        (**self).provider_id()
    }
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        (**self).embed_batch(texts)
    }
    fn stats(&self) -> ProviderStats {
        (**self).stats()
    }
    fn warnings(&self) -> Vec<String> {
        (**self).warnings()
    }
}

fn default_dimension() -> usize {
    DEFAULT_HASHING_DIMENSION
}
fn default_token_env() -> String {
    "FISHBONE_EMBEDDING_TOKEN".into()
}
fn default_batch_size() -> usize {
    32
}
fn default_retries() -> usize {
    3
}
fn default_backoff_ms() -> u64 {
    250
}
fn default_timeout_ms() -> u64 {
    30_000
}
fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteEmbeddingConfig {
    pub endpoint: String,
    pub dimension: usize,
    #[serde(default = "default_token_env")]
    pub token_env: String,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_retries")]
    pub max_retries: usize,
    #[serde(default = "default_backoff_ms")]
    pub retry_backoff_ms: u64,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

impl RemoteEmbeddingConfig {
    pub fn new(endpoint: impl Into<String>, dimension: usize) -> Self {
        Self {
            endpoint: endpoint.into(),
            dimension,
            token_env: default_token_env(),
            batch_size: default_batch_size(),
            max_retries: default_retries(),
            retry_backoff_ms: default_backoff_ms(),
            timeout_ms: default_timeout_ms(),
            max_in_flight: default_in_flight(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbeddingProviderConfig {
    Hashing {
        #[serde(default = "default_dimension")]
        dimension: usize,
    },
    Remote(RemoteEmbeddingConfig),
}

impl Default for EmbeddingProviderConfig {
    fn default() -> Self {
        EmbeddingProviderConfig::Hashing {
            dimension: DEFAULT_HASHING_DIMENSION,
        }
    }
}

impl EmbeddingProviderConfig {
    pub fn dimension(&self) -> usize {
        match self {
            EmbeddingProviderConfig::Hashing { dimension } => *dimension,
            EmbeddingProviderConfig::Remote(r) => r.dimension,
        }
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dimension() < MIN_DIMENSION {
            return Err(EmbedError::InvalidConfig(format!(
                "dimension {} is below the minimum of {MIN_DIMENSION}",
                self.dimension()
            )));
        }
        if let EmbeddingProviderConfig::Remote(r) = self {
            if r.batch_size == 0 {
                return Err(EmbedError::InvalidConfig("batch size must be at least 1".into()));
            }
            if r.max_in_flight == 0 {
                return Err(EmbedError::InvalidConfig("max_in_flight must be at least 1".into()));
            }
            if r.endpoint.trim().is_empty() {
                return Err(EmbedError::InvalidConfig("remote endpoint is empty".into()));
            }
        }
        Ok(())
    }

    pub fn is_remote(&self) -> bool {
        matches!(self, EmbeddingProviderConfig::Remote(_))
    }

    pub fn build(&self) -> Result<Box<dyn EmbeddingProvider>, EmbedError> {
        self.validate()?;
        Ok(match self {
            EmbeddingProviderConfig::Hashing { dimension } => Box::new(HashingEmbedder::new(*dimension)?),
            EmbeddingProviderConfig::Remote(r) => Box::new(RemoteEmbedder::new(r.clone())?),
        })
    }
}
