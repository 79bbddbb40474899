//! Blocking JSON POST with bounded retries, shared by the remote providers.

use std::fmt;
use std::time::Duration;

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_retries: usize,
    pub backoff: Duration,
}

#[derive(Debug, Clone)]
pub enum HttpFailure {
    Status { code: u16, body: String },
    Transport(String),
}

impl HttpFailure {
    fn is_retryable(&self) -> bool {
        match self {
            HttpFailure::Status { code, .. } => *code == 429 || *code >= 500,
            HttpFailure::Transport(_) => true,
        }
    }
}

impl fmt::Display for HttpFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HttpFailure::Status { code, body } => {
                let snippet: String = body.chars().take(200).collect();
                write!(f, "HTTP {code}: {snippet}")
            }
            HttpFailure::Transport(msg) => write!(f, "transport error: {msg}"),
        }
    }
}

pub struct PostOutcome {
    pub result: Result<String, HttpFailure>,
    pub retries: usize,
}

fn post_once(agent: &ureq::Agent, url: &str, token: &str, body: &str) -> Result<String, HttpFailure> {
    let mut req = agent.post(url).set("Content-Type", "application/json");
    if !token.is_empty() {
        req = req.set("Authorization", &format!("Bearer {token}"));
    }
    match req.send_string(body) {
        Ok(resp) => resp.into_string().map_err(|e| HttpFailure::Transport(e.to_string())),
        Err(ureq::Error::Status(code, resp)) => Err(HttpFailure::Status {
            code,
            body: resp.into_string().unwrap_or_default(),
        }),
        Err(e) => Err(HttpFailure::Transport(e.to_string())),
    }
}

/// Linear backoff between attempts; non-retryable statuses fail immediately.
pub fn post_json(agent: &ureq::Agent, url: &str, token: &str, body: &str, policy: RetryPolicy) -> PostOutcome {
    let mut retries = 0;
    loop {
        match post_once(agent, url, token, body) {
            Ok(text) => {
                return PostOutcome {
                    result: Ok(text),
                    retries,
                }
            }
            Err(e) if e.is_retryable() && retries < policy.max_retries => {
                log::warn!("POST {url} failed ({e}); retry {}", retries + 1);
                retries += 1;
                std::thread::sleep(policy.backoff * retries as u32);
            }
            Err(e) => {
                return PostOutcome {
                    result: Err(e),
                    retries,
                }
            }
        }
    }
}
