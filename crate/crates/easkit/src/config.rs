//! TOML run configuration and the builders that turn it into live backends.
//!
//! Relative paths in a config file resolve against the file's directory.
//! Credentials never live in the file itself, only the name of the
//! environment variable holding them.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::align::Tokenizer;
use crate::error::Error;
use crate::identity::{builtin_profiles, load_profiles, validate_profiles, IdentityProfile};
use crate::metrics::BleuTokenizer;
use crate::scorer::{FixtureScorer, LogprobScorer, OpenAiScorer, RequestOptions};
use crate::scoring::ShiftConfig;
use crate::seedselect::AmbiguityBand;
use crate::templates::AttitudeTemplatePair;
use crate::translate::{
    ChatTranslator, DecodingOptions, FixtureTranslator, Language, LanguagePair, PromptSpec,
    SubprocessTranslator, TranslationEngine, DEFAULT_LEXICAL_PAIRS, DEFAULT_MORAL_CONTEXT,
    DEFAULT_TASK_TEMPLATE,
};
use crate::Result;

pub const DEFAULT_API_KEY_ENV: &str = "EASKIT_API_KEY";

fn default_delta() -> f64 {
    0.2
}

fn default_parallelism() -> usize {
    4
}

fn default_true() -> bool {
    true
}

fn default_api_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_string()
}

fn default_iterations() -> usize {
    10
}

fn default_floor() -> f64 {
    crate::align::DEFAULT_PROBABILITY_FLOOR
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanguageConfig {
    pub code: String,
    pub name: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanguagesConfig {
    pub source: LanguageConfig,
    pub target: LanguageConfig,
}

impl Default for LanguagesConfig {
    fn default() -> Self {
        LanguagesConfig {
            source: LanguageConfig { code: "en".into(), name: "English".into() },
            target: LanguageConfig { code: "zh".into(), name: "Chinese".into() },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScorerConfig {
    /// JSON fixture of canned log-probabilities.
    Fixture { model: String, path: PathBuf },
    /// Completions endpoint with echoed token log-probabilities.
    Openai {
        model: String,
        base_url: String,
        #[serde(default = "default_api_key_env")]
        api_key_env: String,
        #[serde(default)]
        timeout_secs: Option<u64>,
        #[serde(default)]
        retries: Option<u32>,
        #[serde(default)]
        max_parallel: Option<usize>,
    },
}

impl ScorerConfig {
    pub fn request_options(&self) -> RequestOptions {
        let mut options = RequestOptions::default();
        if let ScorerConfig::Openai { timeout_secs, retries, max_parallel, .. } = self {
            if let Some(t) = timeout_secs {
                options.timeout_secs = *t;
            }
            if let Some(r) = retries {
                options.retries = *r;
            }
            if let Some(p) = max_parallel {
                options.max_parallel = *p;
            }
        }
        options
    }

    pub fn describe(&self) -> String {
        match self {
            ScorerConfig::Fixture { model, .. } => format!("fixture:{model}"),
            ScorerConfig::Openai { model, base_url, .. } => format!("openai:{base_url}:{model}"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TranslatorConfig {
    /// JSON fixture mapping full prompts to translations.
    Fixture {
        name: String,
        path: PathBuf,
    },
    /// Chat-completions endpoint.
    Chat {
        model: String,
        base_url: String,
        #[serde(default = "default_api_key_env")]
        api_key_env: String,
        #[serde(default)]
        beam_size: Option<u32>,
        #[serde(default)]
        max_new_tokens: Option<u32>,
    },
    /// External command reading one prompt line from stdin.
    Subprocess {
        command: Vec<String>,
    },
}

impl TranslatorConfig {
    pub fn decoding(&self) -> DecodingOptions {
        let mut decoding = DecodingOptions::default();
        if let TranslatorConfig::Chat { beam_size, max_new_tokens, .. } = self {
            if let Some(b) = beam_size {
                decoding.beam_size = *b;
            }
            if let Some(m) = max_new_tokens {
                decoding.max_new_tokens = *m;
            }
        }
        decoding
    }

    pub fn describe(&self) -> String {
        match self {
            TranslatorConfig::Fixture { name, .. } => format!("fixture:{name}"),
            TranslatorConfig::Chat { model, base_url, .. } => format!("chat:{base_url}:{model}"),
            TranslatorConfig::Subprocess { command } => {
                format!("subprocess:{}", command.join(" "))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptConfig {
    #[serde(default)]
    pub task_template: Option<String>,
    /// Whether the fairness instruction is prepended.
    #[serde(default = "default_true")]
    pub moral_context: bool,
    #[serde(default)]
    pub moral_context_text: Option<String>,
    /// Whether the keyword translation block is prepended.
    #[serde(default = "default_true")]
    pub lexical_block: bool,
    #[serde(default)]
    pub lexical_pairs: Option<Vec<(String, String)>>,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            task_template: None,
            moral_context: true,
            moral_context_text: None,
            lexical_block: true,
            lexical_pairs: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignerConfig {
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    /// External aligner command; wins over the trained table when set.
    #[serde(default)]
    pub command: Option<Vec<String>>,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_floor")]
    pub probability_floor: f64,
    #[serde(default)]
    pub tokenizer: Option<Tokenizer>,
}

impl Default for AlignerConfig {
    fn default() -> Self {
        AlignerConfig {
            lexicon: None,
            command: None,
            iterations: default_iterations(),
            probability_floor: default_floor(),
            tokenizer: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateOverride {
    pub positive: String,
    pub negative: String,
    pub judgment: String,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TemplatesConfig {
    #[serde(default)]
    pub source: Option<TemplateOverride>,
    #[serde(default)]
    pub target: Option<TemplateOverride>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub lower: f64,
    pub upper: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        let band = AmbiguityBand::default();
        BandConfig { lower: band.lower, upper: band.upper }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SeedsConfig {
    #[serde(default)]
    pub words: Option<PathBuf>,
    /// Identity keys to scan; all profiles when absent.
    #[serde(default)]
    pub profiles: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GrammarConfig {
    /// Grammar-check service endpoint for the optional second repair pass;
    /// the rule pass always runs.
    #[serde(default)]
    pub service_url: Option<String>,
    #[serde(default)]
    pub language: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Token scheme for n-gram quality metrics on the target side; derived
    /// from the target language when absent.
    #[serde(default)]
    pub tokenizer: Option<BleuTokenizer>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub profiles: Option<PathBuf>,
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
    #[serde(default)]
    pub cache: Option<PathBuf>,
    /// External per-segment quality scores (CSV) folded into the report.
    #[serde(default)]
    pub scores: Option<PathBuf>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub languages: LanguagesConfig,
    pub scorer: ScorerConfig,
    pub translator: TranslatorConfig,
    #[serde(default)]
    pub prompt: PromptConfig,
    #[serde(default)]
    pub aligner: AlignerConfig,
    #[serde(default)]
    pub templates: TemplatesConfig,
    #[serde(default)]
    pub band: BandConfig,
    #[serde(default)]
    pub seeds: SeedsConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub grammar: GrammarConfig,
}

fn resolve(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&path);
    }
}

/// Sets `key` (a dotted path like `aligner.iterations`) to `raw` inside a
/// parsed document. The value text uses toml syntax; bare words that do not
/// parse as a toml value fall back to plain strings, so `--set scorer.model=m2`
/// needs no extra quoting.
fn apply_override(root: &mut toml::Value, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key {key:?} has an empty segment")));
    }
    let value = match format!("x = {raw}").parse::<toml::Table>() {
        Ok(mut table) => table.remove("x").expect("parsed table has the one key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let table = node.as_table_mut().ok_or_else(|| {
            Error::Config(format!("override key {key:?} crosses a non-table value"))
        })?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node.as_table_mut().ok_or_else(|| {
        Error::Config(format!("override key {key:?} crosses a non-table value"))
    })?;
    table.insert(parts.last().expect("key has segments").to_string(), value);
    Ok(())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides(text, &[])
    }

    /// Parses the document after applying `(key, value)` overrides, so every
    /// configuration field can be set from the command line.
    pub fn parse_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut value: toml::Value =
            text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }
        let config: RunConfig =
            value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Loads the file and resolves its relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with_overrides(path, &[])
    }

    pub fn load_with_overrides(
        path: impl AsRef<Path>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse_with_overrides(&text, overrides)?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.corpus);
        resolve(base, &mut self.out_dir);
        for path in [
            &mut self.profiles,
            &mut self.stopwords,
            &mut self.cache,
            &mut self.scores,
            &mut self.aligner.lexicon,
            &mut self.seeds.words,
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, path);
        }
        match &mut self.scorer {
            ScorerConfig::Fixture { path, .. } => resolve(base, path),
            ScorerConfig::Openai { .. } => {}
        }
        if let TranslatorConfig::Fixture { path, .. } = &mut self.translator {
            resolve(base, path);
        }
    }

    fn validate(&self) -> Result<()> {
        self.shift_config()?;
        self.ambiguity_band()?;
        self.prompt_spec()?.validate()?;
        self.source_templates()?;
        self.target_templates()?;
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        if self.aligner.iterations == 0 {
            return Err(Error::Config("aligner iterations must be at least 1".into()));
        }
        if !(self.aligner.probability_floor > 0.0 && self.aligner.probability_floor < 1.0) {
            return Err(Error::Config("probability floor must be inside (0, 1)".into()));
        }
        Ok(())
    }

    pub fn shift_config(&self) -> Result<ShiftConfig> {
        ShiftConfig::new(self.delta)
    }

    pub fn ambiguity_band(&self) -> Result<AmbiguityBand> {
        AmbiguityBand::new(self.band.lower, self.band.upper)
    }

    pub fn language_pair(&self) -> LanguagePair {
        LanguagePair {
            source: Language::new(&self.languages.source.code, &self.languages.source.name),
            target: Language::new(&self.languages.target.code, &self.languages.target.name),
        }
    }

    pub fn prompt_spec(&self) -> Result<PromptSpec> {
        let task_template = self
            .prompt
            .task_template
            .clone()
            .unwrap_or_else(|| DEFAULT_TASK_TEMPLATE.to_string());
        let moral_context = if self.prompt.moral_context {
            Some(
                self.prompt
                    .moral_context_text
                    .clone()
                    .unwrap_or_else(|| DEFAULT_MORAL_CONTEXT.to_string()),
            )
        } else {
            None
        };
        let lexical_pairs = if self.prompt.lexical_block {
            Some(self.prompt.lexical_pairs.clone().unwrap_or_else(|| {
                DEFAULT_LEXICAL_PAIRS
                    .iter()
                    .map(|(s, t)| (s.to_string(), t.to_string()))
                    .collect()
            }))
        } else {
            None
        };
        let spec = PromptSpec { task_template, moral_context, lexical_pairs };
        spec.validate()?;
        Ok(spec)
    }

    fn templates_for(
        &self,
        side: &Option<TemplateOverride>,
        code: &str,
    ) -> Result<AttitudeTemplatePair> {
        if let Some(over) = side {
            let pair = AttitudeTemplatePair {
                language: code.to_string(),
                positive_template: over.positive.clone(),
                negative_template: over.negative.clone(),
                judgment_token: over.judgment.clone(),
            };
            pair.validate()?;
            return Ok(pair);
        }
        AttitudeTemplatePair::builtin(code).ok_or_else(|| {
            Error::Config(format!(
                "no built-in judgment templates for language {code:?}; configure them"
            ))
        })
    }

    pub fn source_templates(&self) -> Result<AttitudeTemplatePair> {
        self.templates_for(&self.templates.source, &self.languages.source.code)
    }

    pub fn target_templates(&self) -> Result<AttitudeTemplatePair> {
        self.templates_for(&self.templates.target, &self.languages.target.code)
    }

    /// Target-side tokenizer for alignment and extraction.
    pub fn target_tokenizer(&self) -> Tokenizer {
        self.aligner.tokenizer.unwrap_or({
            if self.languages.target.code == "zh" {
                Tokenizer::Character
            } else {
                Tokenizer::Whitespace
            }
        })
    }

    /// Target-side tokenizer for n-gram quality metrics.
    pub fn bleu_tokenizer(&self) -> BleuTokenizer {
        self.metrics.tokenizer.unwrap_or({
            if self.languages.target.code == "zh" {
                BleuTokenizer::Character
            } else {
                BleuTokenizer::WhitespacePunct
            }
        })
    }

    pub fn build_scorer(&self) -> Result<Box<dyn LogprobScorer>> {
        match &self.scorer {
            ScorerConfig::Fixture { model, path } => {
                Ok(Box::new(FixtureScorer::from_file(model.clone(), path)?))
            }
            ScorerConfig::Openai { model, base_url, api_key_env, .. } => {
                Ok(Box::new(OpenAiScorer::new(
                    base_url.clone(),
                    model.clone(),
                    self.scorer.request_options(),
                    Some(api_key_env.as_str()),
                )?))
            }
        }
    }

    pub fn build_translator(&self) -> Result<Box<dyn TranslationEngine>> {
        match &self.translator {
            TranslatorConfig::Fixture { name, path } => {
                Ok(Box::new(FixtureTranslator::from_file(name.clone(), path)?))
            }
            TranslatorConfig::Chat { model, base_url, api_key_env, .. } => {
                Ok(Box::new(ChatTranslator::new(
                    base_url.clone(),
                    model.clone(),
                    Some(api_key_env.clone()),
                    self.translator.decoding(),
                )?))
            }
            TranslatorConfig::Subprocess { command } => {
                Ok(Box::new(SubprocessTranslator::new(command.clone())?))
            }
        }
    }

    /// Identity profiles from the configured file, or the built-in set.
    pub fn load_profiles(&self) -> Result<Vec<IdentityProfile>> {
        let profiles = match &self.profiles {
            Some(path) => load_profiles(path)?,
            None => builtin_profiles(),
        };
        validate_profiles(&profiles)?;
        Ok(profiles)
    }

    /// Profiles used for the seed scan: the configured subset, or all.
    pub fn seed_profiles(&self) -> Result<Vec<IdentityProfile>> {
        let all = self.load_profiles()?;
        let Some(keys) = &self.seeds.profiles else {
            return Ok(all);
        };
        let mut subset = Vec::with_capacity(keys.len());
        for key in keys {
            let profile = all
                .iter()
                .find(|p| &p.key == key)
                .ok_or_else(|| Error::Config(format!("unknown seed profile {key:?}")))?;
            subset.push(profile.clone());
        }
        Ok(subset)
    }

    /// Grammar fixer for realization: the rule pass, plus the configured
    /// checking service when one is set.
    pub fn build_grammar_fixer(&self) -> Result<crate::grammar::GrammarFixer> {
        match &self.grammar.service_url {
            Some(url) => {
                let language =
                    self.grammar.language.clone().unwrap_or_else(|| "en-US".to_string());
                let service =
                    crate::grammar::GrammarService::new(url.clone(), language, Default::default())?;
                Ok(crate::grammar::GrammarFixer::with_service(service))
            }
            None => Ok(crate::grammar::GrammarFixer::rules_only()),
        }
    }

    /// Stopword list, one word per line; empty when not configured.
    pub fn load_stopwords(&self) -> Result<std::collections::BTreeSet<String>> {
        let Some(path) = &self.stopwords else {
            return Ok(Default::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect())
    }
}
