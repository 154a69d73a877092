//! Selecting attitude words for corpus synthesis.
//!
//! Candidates are scored in the source language, filtered to the ambiguous
//! band, and optionally scanned once per identity setting: the word is put
//! into a short seed sentence, the sentence is machine translated, and the
//! translated word is scored with the target-language templates. Words whose
//! attitude survives translation in a stable way make good seeds.

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::align::{ExtractionStatus, Tokenizer, WordExtractor};
use crate::error::Error;
use crate::identity::{Agreement, IdentityProfile};
use crate::parallel::map_bounded;
use crate::scorer::LogprobScorer;
use crate::scoring::eas;
use crate::templates::AttitudeTemplatePair;
use crate::translate::{LanguagePair, PromptSpec, TranslationEngine};
use crate::Result;

/// Reads one candidate word per line, lowercased, first occurrence wins.
/// Blank lines and `#` comments are skipped.
pub fn read_candidate_words(reader: impl Read) -> Result<Vec<String>> {
    let mut seen = std::collections::BTreeSet::new();
    let mut words = Vec::new();
    for line in BufReader::new(reader).lines() {
        let line = line.map_err(|e| Error::Input(e.to_string()))?;
        let word = line.trim().to_lowercase();
        if word.is_empty() || word.starts_with('#') {
            continue;
        }
        if seen.insert(word.clone()) {
            words.push(word);
        }
    }
    Ok(words)
}

pub fn load_candidate_words(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_candidate_words(file)
}

/// Attitude score band, bounds included, inside which a word reads as
/// ambiguous rather than clearly positive or negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityBand {
    pub lower: f64,
    pub upper: f64,
}

impl AmbiguityBand {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::Config(format!(
                "ambiguity band needs lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(AmbiguityBand { lower, upper })
    }

    pub fn contains(&self, score: f64) -> bool {
        score >= self.lower && score <= self.upper
    }
}

impl Default for AmbiguityBand {
    fn default() -> Self {
        AmbiguityBand { lower: -2.5, upper: 0.8 }
    }
}

/// A candidate word with its source-language attitude score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredWord {
    pub word: String,
    pub e_source: f64,
}

/// Scores every candidate with the source-language templates, in input
/// order. The first scoring failure aborts the scan, naming the word.
pub fn score_candidates(
    scorer: &dyn LogprobScorer,
    templates: &AttitudeTemplatePair,
    words: &[String],
    parallelism: usize,
) -> Result<Vec<ScoredWord>> {
    let results = map_bounded(words, parallelism, |_, word| eas(scorer, templates, word));
    let mut scored = Vec::with_capacity(words.len());
    for (word, result) in words.iter().zip(results) {
        let e_source = result
            .map_err(|e| Error::Scoring { attempts: 1, message: format!("{word}: {e}") })?;
        scored.push(ScoredWord { word: word.clone(), e_source });
    }
    Ok(scored)
}

/// Keeps the words whose score sits inside the band, preserving order.
pub fn filter_ambiguous(scored: &[ScoredWord], band: &AmbiguityBand) -> Vec<ScoredWord> {
    scored.iter().filter(|w| band.contains(w.e_source)).cloned().collect()
}

/// Builds the short seed sentence carrying one attitude word, e.g.
/// "He is a nice man." for the binary male identity.
pub fn fill_seed_template(word: &str, profile: &IdentityProfile) -> Result<String> {
    if word.trim().is_empty() {
        return Err(Error::Input("seed word is empty".into()));
    }
    let subject = profile.source.pronouns.subject.as_str();
    let mut sentence = String::new();
    let mut chars = subject.chars();
    if let Some(first) = chars.next() {
        sentence.extend(first.to_uppercase());
        sentence.push_str(chars.as_str());
    }
    let verb = match profile.agreement {
        Agreement::Singular => "is",
        Agreement::Plural => "are",
    };
    sentence.push(' ');
    sentence.push_str(verb);
    sentence.push_str(" a ");
    sentence.push_str(word);
    sentence.push(' ');
    sentence.push_str(profile.bare_source_noun());
    sentence.push('.');
    Ok(sentence)
}

/// Translation-side score of one word in one identity context. The score is
/// present exactly when the translated word was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextScore {
    pub identity: String,
    pub e_translation: Option<f64>,
    pub status: ExtractionStatus,
}

/// One candidate word after the pre/post scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredWordPair {
    pub word: String,
    pub e_source: f64,
    pub contexts: Vec<ContextScore>,
}

/// A word/identity cell the scan could not finish (translation or scoring
/// backend failure), kept out of the result rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanFailure {
    pub word: String,
    pub identity: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOutcome {
    pub pairs: Vec<ScoredWordPair>,
    pub failures: Vec<ScanFailure>,
}

/// Everything the pre/post scan needs around the word list.
pub struct ScanContext<'a> {
    pub scorer: &'a dyn LogprobScorer,
    pub source_templates: &'a AttitudeTemplatePair,
    pub target_templates: &'a AttitudeTemplatePair,
    pub engine: &'a dyn TranslationEngine,
    pub prompt: &'a PromptSpec,
    pub languages: &'a LanguagePair,
    pub extractor: &'a WordExtractor,
    pub target_tokenizer: Tokenizer,
    pub profiles: &'a [IdentityProfile],
    pub parallelism: usize,
}

fn scan_one_context(
    word: &ScoredWord,
    profile: &IdentityProfile,
    context: &ScanContext,
) -> std::result::Result<ContextScore, String> {
    let sentence = fill_seed_template(&word.word, profile).map_err(|e| e.to_string())?;
    let source_tokens = Tokenizer::Whitespace.tokenize(&sentence);
    let tracked_index = source_tokens
        .iter()
        .position(|t| t == &word.word)
        .ok_or_else(|| format!("word {:?} not found in its own seed sentence", word.word))?;
    let prompt = context
        .prompt
        .build_prompt(&sentence, context.languages)
        .map_err(|e| e.to_string())?;
    let task_block = context.prompt.task_block(&sentence, context.languages);
    let hypothesis =
        context.engine.translate(&prompt, &task_block).map_err(|e| e.to_string())?;
    let hypothesis_tokens = context.target_tokenizer.tokenize(&hypothesis);
    let extraction = context
        .extractor
        .extract_target_word(&source_tokens, tracked_index, &hypothesis_tokens)
        .map_err(|e| e.to_string())?;
    let e_translation = match &extraction.target_word {
        Some(target_word) => Some(
            eas(context.scorer, context.target_templates, target_word)
                .map_err(|e| e.to_string())?,
        ),
        None => None,
    };
    Ok(ContextScore {
        identity: profile.key.clone(),
        e_translation,
        status: extraction.status,
    })
}

/// Scans each word in each identity context: seed sentence, translation,
/// word extraction, target-side attitude score. Backend failures become
/// manifest entries instead of aborting the whole scan.
pub fn pre_post_scan(words: &[ScoredWord], context: &ScanContext) -> ScanOutcome {
    let cells: Vec<(usize, usize)> = (0..words.len())
        .flat_map(|w| (0..context.profiles.len()).map(move |p| (w, p)))
        .collect();
    let results = map_bounded(&cells, context.parallelism, |_, &(w, p)| {
        scan_one_context(&words[w], &context.profiles[p], context)
    });
    let mut pairs: Vec<ScoredWordPair> = words
        .iter()
        .map(|w| ScoredWordPair { word: w.word.clone(), e_source: w.e_source, contexts: vec![] })
        .collect();
    let mut failures = Vec::new();
    for (&(w, p), result) in cells.iter().zip(results) {
        match result {
            Ok(score) => pairs[w].contexts.push(score),
            Err(message) => failures.push(ScanFailure {
                word: words[w].word.clone(),
                identity: context.profiles[p].key.clone(),
                message,
            }),
        }
    }
    ScanOutcome { pairs, failures }
}

fn status_label(status: ExtractionStatus) -> &'static str {
    match status {
        ExtractionStatus::Ok => "ok",
        ExtractionStatus::CopyFailure => "copy_failure",
        ExtractionStatus::NoAlignment => "no_alignment",
    }
}

/// One CSV row per word/identity cell: `word,e_source,context,e_translation,status`.
pub fn scan_csv(outcome: &ScanOutcome) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["word", "e_source", "context", "e_translation", "status"])
        .map_err(|e| Error::Input(e.to_string()))?;
    for pair in &outcome.pairs {
        for context in &pair.contexts {
            writer
                .write_record([
                    pair.word.clone(),
                    pair.e_source.to_string(),
                    context.identity.clone(),
                    context.e_translation.map(|v| v.to_string()).unwrap_or_default(),
                    status_label(context.status).to_string(),
                ])
                .map_err(|e| Error::Input(e.to_string()))?;
        }
    }
    let bytes = writer.into_inner().map_err(|e| Error::Input(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Input(e.to_string()))
}
