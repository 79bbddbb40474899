//! Task names, fine-bone themes and issue summaries from a chat model, with
//! a deterministic keyword stub used offline and as the fallback.

pub mod prompts;
mod remote;
pub mod stub;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use prompts::{PromptId, PromptTemplate};
pub use remote::RemoteChat;

pub const THEME_WORD_LIMIT: usize = 5;
pub const SUMMARY_WORD_LIMIT: usize = 25;
pub const STUB_PROVIDER_ID: &str = "stub-tf";

#[derive(Debug, Error)]
pub enum SummarizerError {
    #[error("cannot summarize an empty sentence list")]
    EmptyInput,
    #[error("theme count must be at least 1")]
    ZeroThemes,
    #[error("invalid summarizer configuration: {0}")]
    InvalidConfig(String),
    #[error("environment variable {0} holding the chat token is not set")]
    MissingToken(String),
    #[error("summary cache I/O: {0}")]
    Cache(#[from] std::io::Error),
}

fn default_model() -> String {
    "gpt-3.5-turbo".into()
}
fn default_token_env() -> String {
    "FISHBONE_CHAT_TOKEN".into()
}
fn default_retries() -> usize {
    3
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_timeout_ms() -> u64 {
    60_000
}
fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteChatConfig {
    pub endpoint: String,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_retries")]
    pub max_retries: usize,
    #[serde(default = "default_backoff_ms")]
    pub retry_backoff_ms: u64,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_token_env")]
    pub token_env: String,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

impl RemoteChatConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: default_model(),
            temperature: 0.0,
            max_retries: default_retries(),
            retry_backoff_ms: default_backoff_ms(),
            timeout_ms: default_timeout_ms(),
            token_env: default_token_env(),
            max_in_flight: default_in_flight(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SummarizerProviderConfig {
    #[default]
    Stub,
    Remote(RemoteChatConfig),
}

impl SummarizerProviderConfig {
    pub fn validate(&self) -> Result<(), SummarizerError> {
        if let SummarizerProviderConfig::Remote(r) = self {
            if !(r.temperature >= 0.0 && r.temperature.is_finite()) {
                return Err(SummarizerError::InvalidConfig(format!(
                    "temperature must be a finite value >= 0, got {}",
                    r.temperature
                )));
            }
            if r.endpoint.trim().is_empty() {
                return Err(SummarizerError::InvalidConfig("chat endpoint is empty".into()));
            }
            if r.max_in_flight == 0 {
                return Err(SummarizerError::InvalidConfig(
                    "max_in_flight must be at least 1".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn is_remote(&self) -> bool {
        matches!(self, SummarizerProviderConfig::Remote(_))
    }
}

/// Result of one chat request after the backend's own retries.
pub struct ChatOutcome {
    pub result: Result<String, String>,
    pub retries: usize,
}

pub trait ChatBackend: Send + Sync {
    /// Identifies model and decoding settings; part of the cache key.
    fn id(&self) -> &str;

    fn complete(&self, prompt: &str) -> ChatOutcome;
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarizerStats {
    pub remote_calls: usize,
    pub retries: usize,
    pub cache_hits: usize,
    pub fallbacks: usize,
}

#[derive(Default)]
struct Counters {
    remote_calls: AtomicUsize,
    retries: AtomicUsize,
    cache_hits: AtomicUsize,
    fallbacks: AtomicUsize,
}

/// Strips surrounding quotes and trailing punctuation and keeps the first
/// `limit` whitespace-delimited words.
pub fn enforce_word_limit(text: &str, limit: usize) -> String {
    fn trim(s: &str) -> &str {
        s.trim_start_matches(|c: char| c.is_whitespace() || "'`‘’*#".contains(c))
            .trim_end_matches(|c: char| c.is_whitespace() || "'`‘’*.,;:!?".contains(c))
    }
    let unquoted: String = text.chars().filter(|c| !"\"“”".contains(*c)).collect();
    let words: Vec<&str> = trim(&unquoted).split_whitespace().take(limit).collect();
    trim(&words.join(" ")).to_string()
}

fn strip_item_marker(line: &str) -> &str {
    let mut s = line.trim().trim_start_matches(['-', '*', '•']).trim_start();
    let digits = s.len() - s.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits > 0 {
        let rest = &s[digits..];
        if let Some(r) = rest.strip_prefix(['.', ')', ':']) {
            s = r.trim_start();
        }
    }
    strip_label(s)
}

/// Drops a leading `Theme:` or `Theme 2:` label.
fn strip_label(s: &str) -> &str {
    let lower = s.to_lowercase();
    if !lower.starts_with("theme") {
        return s;
    }
    match s.find(':') {
        Some(i) if s[5..i].trim().chars().all(|c| c.is_ascii_digit()) => s[i + 1..].trim_start(),
        _ => s,
    }
}

/// Parses a themes response: one item per line (bullets and numbering
/// removed), or a single `;`/`,` separated line. Duplicates are dropped.
pub fn parse_theme_items(response: &str, n: usize) -> Vec<String> {
    let lines: Vec<&str> = response.lines().filter(|l| !l.trim().is_empty()).collect();
    let raw: Vec<&str> = if lines.len() == 1 && n > 1 {
        let line = strip_item_marker(lines[0]);
        let sep = if line.contains(';') { ';' } else { ',' };
        line.split(sep).collect()
    } else {
        lines
    };
    let mut out: Vec<String> = Vec::new();
    for item in raw {
        let theme = enforce_word_limit(strip_item_marker(item), THEME_WORD_LIMIT);
        if !theme.is_empty() && !out.iter().any(|t| t.eq_ignore_ascii_case(&theme)) {
            out.push(theme);
        }
    }
    out.truncate(n);
    out
}

/// Front end over an optional chat backend. Without a backend every call
/// is answered by the stub.
pub struct Summarizer {
    backend: Option<Box<dyn ChatBackend>>,
    cache_dir: Option<PathBuf>,
    max_in_flight: usize,
    counters: Counters,
    warnings: Mutex<Vec<String>>,
    cache_lock: Mutex<()>,
}

impl Summarizer {
    pub fn stub() -> Self {
        Self {
            backend: None,
            cache_dir: None,
            max_in_flight: 1,
            counters: Counters::default(),
            warnings: Mutex::new(Vec::new()),
            cache_lock: Mutex::new(()),
        }
    }

    pub fn with_backend(backend: Box<dyn ChatBackend>) -> Self {
        Self {
            backend: Some(backend),
            ..Self::stub()
        }
    }

    /// Caches remote responses as `<sha256>.txt` files under `dir`.
    pub fn with_cache(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    pub fn from_config(cfg: &SummarizerProviderConfig, cache_dir: Option<&Path>) -> Result<Self, SummarizerError> {
        cfg.validate()?;
        let s = match cfg {
            SummarizerProviderConfig::Stub => Self::stub(),
            SummarizerProviderConfig::Remote(r) => {
                Self::with_backend(Box::new(RemoteChat::new(r.clone())?)).with_max_in_flight(r.max_in_flight)
            }
        };
        Ok(match cache_dir {
            Some(d) => s.with_cache(d),
            None => s,
        })
    }

    pub fn provider_id(&self) -> &str {
        self.backend.as_ref().map_or(STUB_PROVIDER_ID, |b| b.id())
    }

    pub fn stats(&self) -> SummarizerStats {
        SummarizerStats {
            remote_calls: self.counters.remote_calls.load(Ordering::Relaxed),
            retries: self.counters.retries.load(Ordering::Relaxed),
            cache_hits: self.counters.cache_hits.load(Ordering::Relaxed),
            fallbacks: self.counters.fallbacks.load(Ordering::Relaxed),
        }
    }

    pub fn warnings(&self) -> Vec<String> {
        self.warnings.lock().expect("warnings lock").clone()
    }

    fn warn(&self, msg: String) {
        log::warn!("{msg}");
        self.warnings.lock().expect("warnings lock").push(msg);
    }

    fn fallback(&self, what: &str, reason: &str) {
        self.counters.fallbacks.fetch_add(1, Ordering::Relaxed);
        self.warn(format!("{what}: {reason}; using stub output"));
    }

    fn cache_path(&self, backend: &dyn ChatBackend, prompt: &str) -> Option<PathBuf> {
        let dir = self.cache_dir.as_ref()?;
        let mut h = Sha256::new();
        h.update(backend.id().as_bytes());
        h.update([0]);
        h.update(prompt.as_bytes());
        Some(dir.join(format!("{}.txt", hex::encode(h.finalize()))))
    }

    fn store(&self, path: &Path, response: &str) -> std::io::Result<()> {
        let _guard = self.cache_lock.lock().expect("cache lock");
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        fs::File::create(&tmp)?.write_all(response.as_bytes())?;
        fs::rename(tmp, path)
    }

    /// Cached or fresh response; `None` when there is no backend.
    fn ask(&self, prompt: &str) -> Option<Result<String, String>> {
        let backend = self.backend.as_deref()?;
        let path = self.cache_path(backend, prompt);
        if let Some(text) = path.as_ref().and_then(|p| fs::read_to_string(p).ok()) {
            self.counters.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Some(Ok(text));
        }
        let outcome = backend.complete(prompt);
        self.counters.remote_calls.fetch_add(1, Ordering::Relaxed);
        self.counters.retries.fetch_add(outcome.retries, Ordering::Relaxed);
        if let (Ok(text), Some(p)) = (&outcome.result, &path) {
            if let Err(e) = self.store(p, text) {
                self.warn(format!("could not write summary cache entry {}: {e}", p.display()));
            }
        }
        Some(outcome.result)
    }

    pub fn name_task<S: AsRef<str>>(&self, sentences: &[S]) -> Result<String, SummarizerError> {
        if sentences.is_empty() {
            return Err(SummarizerError::EmptyInput);
        }
        let prompt = prompts::TASK_NAME.render(&join(sentences), 1);
        match self.ask(&prompt) {
            None => Ok(stub::task_name(sentences)),
            Some(Ok(text)) => {
                let name = enforce_word_limit(strip_label(text.trim()), THEME_WORD_LIMIT);
                if name.is_empty() {
                    self.fallback("task name", "empty response");
                    Ok(stub::task_name(sentences))
                } else {
                    Ok(name)
                }
            }
            Some(Err(e)) => {
                self.fallback("task name", &e);
                Ok(stub::task_name(sentences))
            }
        }
    }

    pub fn name_themes<S: AsRef<str>>(&self, sentences: &[S], n: usize) -> Result<Vec<String>, SummarizerError> {
        if n == 0 {
            return Err(SummarizerError::ZeroThemes);
        }
        if sentences.is_empty() {
            return Err(SummarizerError::EmptyInput);
        }
        let prompt = prompts::THEMES.render(&join(sentences), n);
        let text = match self.ask(&prompt) {
            None => return Ok(stub::themes(sentences, n)),
            Some(Err(e)) => {
                self.fallback("themes", &e);
                return Ok(stub::themes(sentences, n));
            }
            Some(Ok(text)) => text,
        };
        let mut themes = parse_theme_items(&text, n);
        if themes.is_empty() {
            self.fallback("themes", "unparseable response");
            return Ok(stub::themes(sentences, n));
        }
        if themes.len() < n {
            self.warn(format!(
                "themes: response had {} of {n} items; padding from stub",
                themes.len()
            ));
            let mut extra = stub::themes(sentences, n).into_iter();
            let mut counter = 1;
            while themes.len() < n {
                let candidate = extra.next().unwrap_or_else(|| {
                    counter += 1;
                    format!("theme {counter}")
                });
                if !themes.iter().any(|t| t.eq_ignore_ascii_case(&candidate)) {
                    themes.push(candidate);
                }
            }
        }
        Ok(themes)
    }

    pub fn summarize_issue_group<S: AsRef<str>>(&self, sentences: &[S]) -> Result<String, SummarizerError> {
        if sentences.is_empty() {
            return Err(SummarizerError::EmptyInput);
        }
        let prompt = prompts::GROUP_SUMMARY.render(&join(sentences), 1);
        match self.ask(&prompt) {
            None => Ok(stub::group_summary(sentences)),
            Some(Ok(text)) => {
                let summary = enforce_word_limit(&text, SUMMARY_WORD_LIMIT);
                if summary.is_empty() {
                    self.fallback("issue summary", "empty response");
                    Ok(stub::group_summary(sentences))
                } else {
                    Ok(summary)
                }
            }
            Some(Err(e)) => {
                self.fallback("issue summary", &e);
                Ok(stub::group_summary(sentences))
            }
        }
    }

    /// `summarize_issue_group` over many groups, with up to `max_in_flight`
    /// requests outstanding. Output order matches input order.
    pub fn summarize_many(&self, groups: &[Vec<String>]) -> Result<Vec<String>, SummarizerError> {
        if self.backend.is_none() || self.max_in_flight == 1 {
            return groups.iter().map(|g| self.summarize_issue_group(g)).collect();
        }
        let mut out = Vec::with_capacity(groups.len());
        for chunk in groups.chunks(self.max_in_flight) {
            let results: Vec<Result<String, SummarizerError>> = std::thread::scope(|s| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|g| s.spawn(move || self.summarize_issue_group(g)))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("summary worker")).collect()
            });
            for r in results {
                out.push(r?);
            }
        }
        Ok(out)
    }
}

fn join<S: AsRef<str>>(sentences: &[S]) -> String {
    sentences.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ")
}
