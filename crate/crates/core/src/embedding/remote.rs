use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{AtomicStats, EmbedError, EmbeddingProvider, EmbeddingVector, ProviderStats, RemoteEmbeddingConfig};
use crate::http::{post_json, HttpFailure, RetryPolicy};

#[derive(Serialize)]
struct EmbedRequest<'a> {
    input: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
}

/// Client for an HTTP embedding service speaking
/// `{"input": [..]}` → `{"embeddings": [[..]]}`.
pub struct RemoteEmbedder {
    cfg: RemoteEmbeddingConfig,
    token: String,
    provider_id: String,
    agent: ureq::Agent,
    stats: AtomicStats,
}

impl RemoteEmbedder {
    /// Reads the auth token from `cfg.token_env`.
    pub fn new(cfg: RemoteEmbeddingConfig) -> Result<Self, EmbedError> {
        let token = std::env::var(&cfg.token_env).map_err(|_| EmbedError::MissingToken(cfg.token_env.clone()))?;
        Ok(Self::with_token(cfg, token))
    }

    pub fn with_token(cfg: RemoteEmbeddingConfig, token: impl Into<String>) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build();
        Self {
            provider_id: format!("remote:{}", cfg.endpoint),
            token: token.into(),
            agent,
            cfg,
            stats: AtomicStats::default(),
        }
    }

    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.cfg.max_retries,
            backoff: Duration::from_millis(self.cfg.retry_backoff_ms),
        }
    }

    fn embed_one_batch(&self, batch_index: usize, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let body = serde_json::to_string(&EmbedRequest { input: texts }).expect("request serializes");
        let outcome = post_json(&self.agent, &self.cfg.endpoint, &self.token, &body, self.retry_policy());
        AtomicStats::bump(&self.stats.remote_calls);
        for _ in 0..outcome.retries {
            AtomicStats::bump(&self.stats.retries);
        }
        let text = outcome.result.map_err(|e: HttpFailure| EmbedError::Provider {
            batch_index,
            message: e.to_string(),
        })?;
        let parsed: EmbedResponse = serde_json::from_str(&text).map_err(|e| EmbedError::Provider {
            batch_index,
            message: format!("unparseable response: {e}"),
        })?;
        if parsed.embeddings.len() != texts.len() {
            return Err(EmbedError::Provider {
                batch_index,
                message: format!(
                    "expected {} embeddings, received {}",
                    texts.len(),
                    parsed.embeddings.len()
                ),
            });
        }
        parsed
            .embeddings
            .into_iter()
            .map(|raw| {
                if raw.len() != self.cfg.dimension {
                    return Err(EmbedError::DimensionMismatch {
                        expected: self.cfg.dimension,
                        got: raw.len(),
                    });
                }
                Ok(EmbeddingVector::normalized(&raw, self.provider_id.clone()))
            })
            .collect()
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn provider_id(&self) -> &str {
        &self.provider_id
    }

    fn dimension(&self) -> usize {
        self.cfg.dimension
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let batches: Vec<&[&str]> = texts.chunks(self.cfg.batch_size.max(1)).collect();
        let mut out = Vec::with_capacity(texts.len());
        // Up to max_in_flight batches run concurrently; results keep input order.
        for (wave_index, wave) in batches.chunks(self.cfg.max_in_flight.max(1)).enumerate() {
            let base = wave_index * self.cfg.max_in_flight.max(1);
            let results: Vec<_> = std::thread::scope(|s| {
                let handles: Vec<_> = wave
                    .iter()
                    .enumerate()
                    .map(|(i, batch)| s.spawn(move || self.embed_one_batch(base + i, batch)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("embedding worker panicked"))
                    .collect()
            });
            for r in results {
                out.extend(r?);
            }
        }
        Ok(out)
    }

    fn stats(&self) -> ProviderStats {
        self.stats.snapshot()
    }
}
