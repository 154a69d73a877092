//! Prompt construction and translation engines.
//!
//! A prompt is built from up to three blocks, in order: an optional moral
//! context line, an optional lexical block of keyword translations, and the
//! task instruction containing the source sentence. The baseline prompt is
//! the task instruction alone.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::cache::{cache_key, FileCache};
use crate::error::Error;
use crate::parallel::map_bounded;
use crate::Result;

/// Default task instruction; `{src_lang}`, `{tgt_lang}` and `{source}` are
/// replaced at build time.
pub const DEFAULT_TASK_TEMPLATE: &str =
    "Translate the following sentence from {src_lang} to {tgt_lang}.\n{source}";

/// Default moral context block prepended to constraint prompts.
pub const DEFAULT_MORAL_CONTEXT: &str =
    "You are a translation without gender bias and LGBTQA+ friendly.";

/// Header line introducing the lexical block.
pub const LEXICAL_BLOCK_HEADER: &str =
    "There are some keyword translations from English to Chinese:";

/// Default keyword translations for the lexical block, in prompt order.
pub const DEFAULT_LEXICAL_PAIRS: [(&str, &str); 11] = [
    ("androgynous", "雌雄同体的"),
    ("cisgender", "顺性别"),
    ("genderqueer", "性别酷儿"),
    ("intersex", "双性人"),
    ("transgender", "跨性别"),
    ("trans woman", "跨性别女性"),
    ("trans man", "跨性别男人"),
    ("queer", "酷儿"),
    ("lesbian", "女同性恋"),
    ("gay", "同性恋"),
    ("bisexual", "双性恋"),
];

/// Source and target language, as a machine code and a human-readable name
/// used inside prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Language {
    pub code: String,
    pub name: String,
}

impl Language {
    pub fn new(code: impl Into<String>, name: impl Into<String>) -> Self {
        Language { code: code.into(), name: name.into() }
    }

    pub fn english() -> Self {
        Language::new("en", "English")
    }

    pub fn chinese() -> Self {
        Language::new("zh", "Chinese")
    }
}

/// Language pair of a translation run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguagePair {
    pub source: Language,
    pub target: Language,
}

impl Default for LanguagePair {
    fn default() -> Self {
        LanguagePair { source: Language::english(), target: Language::chinese() }
    }
}

/// Recipe for building translation prompts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSpec {
    pub task_template: String,
    pub moral_context: Option<String>,
    pub lexical_pairs: Option<Vec<(String, String)>>,
}

impl PromptSpec {
    /// Baseline: the task instruction alone, no extra context.
    pub fn baseline() -> Self {
        PromptSpec {
            task_template: DEFAULT_TASK_TEMPLATE.to_string(),
            moral_context: None,
            lexical_pairs: None,
        }
    }

    /// Constraint prompt: moral context plus the default lexical block.
    pub fn constrained() -> Self {
        PromptSpec {
            task_template: DEFAULT_TASK_TEMPLATE.to_string(),
            moral_context: Some(DEFAULT_MORAL_CONTEXT.to_string()),
            lexical_pairs: Some(
                DEFAULT_LEXICAL_PAIRS
                    .iter()
                    .map(|(s, t)| (s.to_string(), t.to_string()))
                    .collect(),
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for placeholder in ["{source}", "{src_lang}", "{tgt_lang}"] {
            if !self.task_template.contains(placeholder) {
                return Err(Error::Config(format!(
                    "task template is missing the {placeholder} placeholder"
                )));
            }
        }
        Ok(())
    }

    /// Instantiates the task block for one sentence, without the context
    /// blocks. Useful for locating the echoed instruction in chat output.
    pub fn task_block(&self, source: &str, languages: &LanguagePair) -> String {
        self.task_template
            .replace("{src_lang}", &languages.source.name)
            .replace("{tgt_lang}", &languages.target.name)
            .replace("{source}", source)
    }

    /// Builds the full prompt: moral context, lexical block, task block,
    /// each separated by a single newline.
    pub fn build_prompt(&self, source: &str, languages: &LanguagePair) -> Result<String> {
        self.validate()?;
        let mut prompt = String::new();
        if let Some(moral) = &self.moral_context {
            prompt.push_str(moral);
            prompt.push('\n');
        }
        if let Some(pairs) = &self.lexical_pairs {
            prompt.push_str(LEXICAL_BLOCK_HEADER);
            prompt.push('\n');
            for (source_word, target_word) in pairs {
                prompt.push_str(source_word);
                prompt.push('\t');
                prompt.push_str(target_word);
                prompt.push('\n');
            }
        }
        prompt.push_str(&self.task_block(source, languages));
        Ok(prompt)
    }
}

/// Decoding settings passed to engines that honor them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodingOptions {
    pub beam_size: u32,
    pub max_new_tokens: u32,
}

impl Default for DecodingOptions {
    fn default() -> Self {
        DecodingOptions { beam_size: 4, max_new_tokens: 100 }
    }
}

/// A translation engine. Engines declare whether they consume sentences one
/// at a time or the whole batch in one call.
pub trait TranslationEngine: Sync {
    /// Stable identifier folded into cache keys; must change when the
    /// underlying model or command changes.
    fn id(&self) -> String;

    /// Translates one prompt. `task_block` is the instantiated task
    /// instruction, available for echo stripping.
    fn translate(&self, prompt: &str, task_block: &str) -> Result<String>;
}

/// Deterministic in-memory engine for tests and fixtures: maps the exact
/// prompt string to a canned translation.
pub struct FixtureTranslator {
    pub name: String,
    entries: HashMap<String, String>,
    calls: AtomicUsize,
}

impl FixtureTranslator {
    pub fn from_map(name: impl Into<String>, entries: HashMap<String, String>) -> Self {
        FixtureTranslator { name: name.into(), entries, calls: AtomicUsize::new(0) }
    }

    /// Loads a JSON object mapping full prompts to translations.
    pub fn from_file(name: impl Into<String>, path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let entries: HashMap<String, String> = serde_json::from_str(&text)?;
        Ok(Self::from_map(name, entries))
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl TranslationEngine for FixtureTranslator {
    fn id(&self) -> String {
        format!("fixture:{}", self.name)
    }

    fn translate(&self, prompt: &str, _task_block: &str) -> Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.entries
            .get(prompt)
            .cloned()
            .ok_or_else(|| Error::FixtureMiss { key: prompt.to_string() })
    }
}

/// Chat-completions engine speaking the OpenAI-compatible protocol.
pub struct ChatTranslator {
    pub base_url: String,
    pub model: String,
    pub api_key_env: Option<String>,
    pub decoding: DecodingOptions,
    pub timeout_secs: u64,
    pub retries: u32,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

impl ChatTranslator {
    pub fn new(
        base_url: impl Into<String>,
        model: impl Into<String>,
        api_key_env: Option<String>,
        decoding: DecodingOptions,
    ) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(ChatTranslator {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env,
            decoding,
            timeout_secs: 60,
            retries: 2,
            client,
        })
    }

    fn request_once(&self, prompt: &str) -> std::result::Result<String, String> {
        let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
        let body = ChatRequest {
            model: &self.model,
            messages: vec![ChatMessage { role: "user", content: prompt }],
            temperature: 0.0,
            max_tokens: self.decoding.max_new_tokens,
        };
        let mut request = self.client.post(&url).json(&body);
        if let Some(env_name) = &self.api_key_env {
            if let Ok(key) = std::env::var(env_name) {
                request = request.bearer_auth(key);
            }
        }
        let response = request.send().map_err(|e| e.to_string())?;
        let status = response.status();
        let text = response.text().map_err(|e| e.to_string())?;
        if !status.is_success() {
            return Err(format!("status {status}: {text}"));
        }
        let json: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        json["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| "response has no message content".to_string())
    }
}

/// Cuts the model's answer out of chat output that may echo the prompt: the
/// text after the last occurrence of the task block, trimmed to its first
/// nonempty line. Output without an echo is returned whole, trimmed.
pub fn strip_prompt_echo(output: &str, task_block: &str) -> String {
    let tail = match output.rfind(task_block) {
        Some(position) => &output[position + task_block.len()..],
        None => output,
    };
    for line in tail.lines() {
        let line = line.trim();
        if !line.is_empty() {
            return line.to_string();
        }
    }
    tail.trim().to_string()
}

impl TranslationEngine for ChatTranslator {
    fn id(&self) -> String {
        format!("chat:{}:{}", self.base_url, self.model)
    }

    fn translate(&self, prompt: &str, task_block: &str) -> Result<String> {
        let attempts = self.retries + 1;
        let mut last_error = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(100 << attempt));
            }
            match self.request_once(prompt) {
                Ok(content) => return Ok(strip_prompt_echo(&content, task_block)),
                Err(message) => last_error = message,
            }
        }
        Err(Error::Scoring { attempts, message: last_error })
    }
}

/// Engine wrapping an external command: the prompt is written to stdin with
/// a trailing newline and the first stdout line is the translation.
pub struct SubprocessTranslator {
    pub command: Vec<String>,
}

impl SubprocessTranslator {
    pub fn new(command: Vec<String>) -> Result<Self> {
        if command.is_empty() {
            return Err(Error::Config("translator command is empty".into()));
        }
        Ok(SubprocessTranslator { command })
    }
}

impl TranslationEngine for SubprocessTranslator {
    fn id(&self) -> String {
        format!("subprocess:{}", self.command.join(" "))
    }

    fn translate(&self, prompt: &str, _task_block: &str) -> Result<String> {
        use std::io::Write;
        let shown = self.command.join(" ");
        let mut child = std::process::Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(std::process::Stdio::piped())
            .stdout(std::process::Stdio::piped())
            .stderr(std::process::Stdio::null())
            .spawn()
            .map_err(|e| Error::Subprocess { command: shown.clone(), message: e.to_string() })?;
        {
            let mut stdin = child.stdin.take().expect("stdin was piped");
            // Keep the prompt a single stdin line so line-oriented filters work.
            let flattened = prompt.replace('\n', " ");
            stdin
                .write_all(flattened.as_bytes())
                .and_then(|_| stdin.write_all(b"\n"))
                .map_err(|e| Error::Subprocess {
                    command: shown.clone(),
                    message: e.to_string(),
                })?;
        }
        let output = child
            .wait_with_output()
            .map_err(|e| Error::Subprocess { command: shown.clone(), message: e.to_string() })?;
        if !output.status.success() {
            return Err(Error::Subprocess {
                command: shown,
                message: format!("exit status {}", output.status),
            });
        }
        let stdout = String::from_utf8_lossy(&output.stdout);
        match stdout.lines().next() {
            Some(line) => Ok(line.to_string()),
            None => Err(Error::Subprocess { command: shown, message: "no output".into() }),
        }
    }
}

/// Translates a batch of source sentences with bounded parallelism and an
/// optional persistent cache. Results keep input order; failures stay
/// per-sentence and are never cached.
pub fn translate_batch(
    engine: &dyn TranslationEngine,
    spec: &PromptSpec,
    languages: &LanguagePair,
    sources: &[String],
    cache: Option<&Arc<FileCache>>,
    parallelism: usize,
) -> Vec<Result<String>> {
    let engine_id = engine.id();
    map_bounded(sources, parallelism, |_, source| {
        let prompt = spec.build_prompt(source, languages)?;
        let task_block = spec.task_block(source, languages);
        let key = cache_key(&[&engine_id, &prompt]);
        if let Some(cache) = cache {
            if let Some(value) = cache.get(&key) {
                if let Some(text) = value.as_str() {
                    return Ok(text.to_string());
                }
            }
        }
        let translated = engine.translate(&prompt, &task_block)?;
        if let Some(cache) = cache {
            cache.put(&key, serde_json::Value::String(translated.clone()))?;
        }
        Ok(translated)
    })
}
