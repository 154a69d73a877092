//! Log-probability backends.
//!
//! A scorer answers one question: what is the log-probability of a
//! continuation given a prompt, summed over the continuation's pieces when
//! the backend tokenizes it into more than one. Implementations cover a
//! JSON fixture for tests and offline runs, and an OpenAI-compatible
//! completions endpoint that reports echoed token log-probabilities. Any
//! scorer can be wrapped in [`CachedScorer`] to persist responses.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::cache::{cache_key, FileCache};
use crate::error::Error;
use crate::parallel::map_bounded;
use crate::Result;

/// Separator between the prompt and continuation in fixture keys.
pub const FIXTURE_KEY_SEPARATOR: &str = "‖";

/// Backend that can score a forced continuation.
pub trait LogprobScorer: Sync {
    /// Stable identifier (kind plus model) used in cache keys.
    fn id(&self) -> String;

    /// Log-probability of `continuation` given `prompt`, summed over pieces.
    fn logprob(&self, prompt: &str, continuation: &str) -> Result<f64>;
}

impl<S: LogprobScorer + ?Sized> LogprobScorer for Box<S> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn logprob(&self, prompt: &str, continuation: &str) -> Result<f64> {
        (**self).logprob(prompt, continuation)
    }
}

/// Request knobs shared by the network backends.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RequestOptions {
    pub timeout_secs: u64,
    /// Additional attempts after the first failure.
    pub retries: u32,
    pub max_parallel: usize,
}

impl Default for RequestOptions {
    fn default() -> Self {
        RequestOptions { timeout_secs: 60, retries: 2, max_parallel: 4 }
    }
}

/// Scores many (prompt, continuation) items with bounded parallelism,
/// returning results in input order.
pub fn logprob_batch(
    scorer: &dyn LogprobScorer,
    items: &[(String, String)],
    max_parallel: usize,
) -> Vec<Result<f64>> {
    map_bounded(items, max_parallel, |_, (prompt, continuation)| {
        scorer.logprob(prompt, continuation)
    })
}

/// Fixture scorer backed by a JSON map from `"{prompt}‖{continuation}"` to
/// either a single log-probability or a list of per-piece values that are
/// summed.
pub struct FixtureScorer {
    model: String,
    entries: HashMap<String, f64>,
    calls: AtomicUsize,
}

impl FixtureScorer {
    pub fn from_map(model: impl Into<String>, entries: HashMap<String, f64>) -> Self {
        FixtureScorer { model: model.into(), entries, calls: AtomicUsize::new(0) }
    }

    /// Loads the JSON fixture file.
    pub fn from_file(model: impl Into<String>, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: HashMap<String, serde_json::Value> = serde_json::from_str(&text)?;
        let mut entries = HashMap::with_capacity(raw.len());
        for (key, value) in raw {
            let logprob = match value {
                serde_json::Value::Number(n) => n.as_f64().ok_or_else(|| {
                    Error::Input(format!("fixture value for {key:?} is not a finite number"))
                })?,
                serde_json::Value::Array(pieces) => {
                    let mut sum = 0.0;
                    for piece in &pieces {
                        sum += piece.as_f64().ok_or_else(|| {
                            Error::Input(format!("fixture piece for {key:?} is not a number"))
                        })?;
                    }
                    sum
                }
                other => {
                    return Err(Error::Input(format!(
                        "fixture value for {key:?} must be a number or list, got {other}"
                    )))
                }
            };
            entries.insert(key, logprob);
        }
        Ok(FixtureScorer { model: "fixture".into(), entries, calls: AtomicUsize::new(0) }
            .with_model(model))
    }

    fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    /// Builds the fixture key for a (prompt, continuation) pair.
    pub fn key(prompt: &str, continuation: &str) -> String {
        format!("{prompt}{FIXTURE_KEY_SEPARATOR}{continuation}")
    }

    /// Number of lookups served so far (used to verify cache hits).
    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LogprobScorer for FixtureScorer {
    fn id(&self) -> String {
        format!("fixture:{}", self.model)
    }

    fn logprob(&self, prompt: &str, continuation: &str) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let key = Self::key(prompt, continuation);
        self.entries
            .get(&key)
            .copied()
            .ok_or(Error::FixtureMiss { key })
    }
}

/// Client for an OpenAI-compatible `/completions` endpoint that supports
/// echoed log-probabilities.
///
/// The prompt and continuation are concatenated and sent with `echo: true`
/// and `max_tokens: 0`; the continuation's log-probability is the sum over
/// the echoed tokens whose byte span overlaps the continuation region. The
/// bearer token, if any, is read from the configured environment variable.
pub struct OpenAiScorer {
    base_url: String,
    model: String,
    options: RequestOptions,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl OpenAiScorer {
    pub fn new(
        base_url: impl Into<String>,
        model: impl Into<String>,
        options: RequestOptions,
        api_key_env: Option<&str>,
    ) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(options.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        let api_key = api_key_env.and_then(|name| std::env::var(name).ok());
        Ok(OpenAiScorer {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            options,
            api_key,
            client,
        })
    }

    fn post(&self, body: &serde_json::Value) -> Result<serde_json::Value> {
        let url = format!("{}/completions", self.base_url);
        let attempts = self.options.retries + 1;
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            let mut request = self.client.post(&url).json(body);
            if let Some(key) = &self.api_key {
                request = request.bearer_auth(key);
            }
            match request.send() {
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        return response.json().map_err(|e| Error::Scoring {
                            attempts: attempt,
                            message: format!("invalid json from backend: {e}"),
                        });
                    }
                    last_error = format!("http status {status}");
                }
                Err(e) => last_error = e.to_string(),
            }
            log::debug!("scoring attempt {attempt}/{attempts} failed: {last_error}");
        }
        Err(Error::Scoring { attempts, message: last_error })
    }
}

impl LogprobScorer for OpenAiScorer {
    fn id(&self) -> String {
        format!("openai:{}", self.model)
    }

    fn logprob(&self, prompt: &str, continuation: &str) -> Result<f64> {
        let full = format!("{prompt}{continuation}");
        let body = serde_json::json!({
            "model": self.model,
            "prompt": full,
            "max_tokens": 0,
            "echo": true,
            "logprobs": 0,
        });
        let response = self.post(&body)?;
        let logprobs = response
            .pointer("/choices/0/logprobs")
            .filter(|v| !v.is_null())
            .ok_or_else(|| {
                Error::Capability("backend response carries no logprobs".into())
            })?;
        let token_logprobs = logprobs
            .get("token_logprobs")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::Capability("backend response has no token_logprobs".into()))?;
        let tokens = logprobs
            .get("tokens")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::Capability("backend response has no tokens".into()))?;
        let offsets = logprobs
            .get("text_offset")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::Capability("backend response has no text_offset".into()))?;
        let continuation_start = prompt.len();
        let mut sum = 0.0;
        let mut covered = false;
        for ((logprob, token), offset) in token_logprobs.iter().zip(tokens).zip(offsets) {
            let offset = offset.as_u64().unwrap_or(0) as usize;
            let token_len = token.as_str().map(str::len).unwrap_or(0);
            // Include every token whose span reaches into the continuation.
            if offset + token_len > continuation_start && offset < full.len() {
                let value = logprob.as_f64().ok_or_else(|| {
                    Error::Capability(
                        "token inside the continuation has a null log-probability".into(),
                    )
                })?;
                sum += value;
                covered = true;
            }
        }
        if !covered {
            return Err(Error::Capability(
                "no echoed token covers the continuation region".into(),
            ));
        }
        Ok(sum)
    }
}

/// Wraps a scorer with persistent caching. Two calls with the same
/// (model, prompt, continuation) return bit-identical values, the second one
/// without touching the backend.
pub struct CachedScorer<S> {
    inner: S,
    cache: Arc<FileCache>,
}

impl<S: LogprobScorer> CachedScorer<S> {
    pub fn new(inner: S, cache: Arc<FileCache>) -> Self {
        CachedScorer { inner, cache }
    }
}

impl<S: LogprobScorer> LogprobScorer for CachedScorer<S> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn logprob(&self, prompt: &str, continuation: &str) -> Result<f64> {
        let key = cache_key(&[&self.id(), prompt, continuation]);
        if let Some(value) = self.cache.get(&key) {
            if let Some(logprob) = value.as_f64() {
                return Ok(logprob);
            }
        }
        let logprob = self.inner.logprob(prompt, continuation)?;
        self.cache.put(&key, serde_json::json!(logprob))?;
        Ok(logprob)
    }
}
