use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ChatBackend, ChatOutcome, RemoteChatConfig, SummarizerError};
use crate::http::{post_json, RetryPolicy};

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize, Serialize)]
struct Message {
    content: String,
}

/// Chat-completion client: `{"model", "messages": [{"role": "user", ..}],
/// "temperature"}` in, `choices[0].message.content` out.
pub struct RemoteChat {
    cfg: RemoteChatConfig,
    token: String,
    id: String,
    agent: ureq::Agent,
}

impl RemoteChat {
    /// Reads the auth token from `cfg.token_env`.
    pub fn new(cfg: RemoteChatConfig) -> Result<Self, SummarizerError> {
        let token = std::env::var(&cfg.token_env).map_err(|_| SummarizerError::MissingToken(cfg.token_env.clone()))?;
        Ok(Self::with_token(cfg, token))
    }

    pub fn with_token(cfg: RemoteChatConfig, token: impl Into<String>) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build();
        Self {
            id: format!("chat:{}@{}:t={}", cfg.model, cfg.endpoint, cfg.temperature),
            token: token.into(),
            agent,
            cfg,
        }
    }
}

impl ChatBackend for RemoteChat {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, prompt: &str) -> ChatOutcome {
        let body = json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
        })
        .to_string();
        let policy = RetryPolicy {
            max_retries: self.cfg.max_retries,
            backoff: Duration::from_millis(self.cfg.retry_backoff_ms),
        };
        let outcome = post_json(&self.agent, &self.cfg.endpoint, &self.token, &body, policy);
        let result = outcome.result.map_err(|e| e.to_string()).and_then(|text| {
            let parsed: ChatResponse =
                serde_json::from_str(&text).map_err(|e| format!("unparseable chat response: {e}"))?;
            parsed
                .choices
                .into_iter()
                .next()
                .map(|c| c.message.content)
                .ok_or_else(|| "chat response has no choices".to_string())
        });
        ChatOutcome {
            result,
            retries: outcome.retries,
        }
    }
}
