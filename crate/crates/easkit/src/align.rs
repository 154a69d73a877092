//! Finding the translation of the tracked word inside a hypothesis.
//!
//! Three routes, tried in a fixed precedence: a verbatim copy of the source
//! word in the hypothesis is a failure by definition (the model refused to
//! translate it), a bilingual lexicon hit wins over statistics, and
//! otherwise either a statistical translation table trained here or an
//! external aligner subprocess picks the word.
//!
//! The statistical table is a single-table EM estimator of `t(target |
//! source)` over co-occurrence in parallel sentences, with uniform
//! initialization, so training is deterministic for a given input order.

use std::collections::BTreeMap;
use std::io::Write;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// How hypothesis and source text is split into alignable tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tokenizer {
    /// Split on whitespace runs; for space-delimited languages.
    Whitespace,
    /// Every non-whitespace character is a token.
    Character,
    /// Overlapping character bigrams; fallback segmenter for unsegmented
    /// languages without an external word segmenter.
    CharBigram,
}

impl Tokenizer {
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        match self {
            Tokenizer::Whitespace => text.split_whitespace().map(str::to_string).collect(),
            Tokenizer::Character => {
                text.chars().filter(|c| !c.is_whitespace()).map(String::from).collect()
            }
            Tokenizer::CharBigram => {
                let chars: Vec<char> =
                    text.chars().filter(|c| !c.is_whitespace()).collect();
                if chars.len() < 2 {
                    return chars.into_iter().map(String::from).collect();
                }
                chars.windows(2).map(|w| w.iter().collect()).collect()
            }
        }
    }
}

/// Translation table estimated by [`train_statistical_aligner`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignmentModel {
    /// `table[source][target]` is the probability of the target token given
    /// the source token; every row sums to one.
    pub table: BTreeMap<String, BTreeMap<String, f64>>,
    pub iterations: usize,
    /// Corpus log-likelihood after each iteration; non-decreasing.
    pub log_likelihood: Vec<f64>,
}

impl AlignmentModel {
    pub fn translation_prob(&self, source: &str, target: &str) -> f64 {
        self.table.get(source).and_then(|row| row.get(target)).copied().unwrap_or(0.0)
    }

    /// Sum of each source row; all values must be within 1e-9 of one.
    pub fn row_sums(&self) -> Vec<(String, f64)> {
        self.table
            .iter()
            .map(|(source, row)| (source.clone(), row.values().sum::<f64>()))
            .collect()
    }

    /// Highest-probability target for a source token, ties broken by the
    /// lexicographically ordered table (first key wins).
    pub fn argmax(&self, source: &str) -> Option<(&str, f64)> {
        let row = self.table.get(source)?;
        let mut best: Option<(&str, f64)> = None;
        for (target, &prob) in row {
            match best {
                Some((_, best_prob)) if prob <= best_prob => {}
                _ => best = Some((target.as_str(), prob)),
            }
        }
        best
    }
}

/// Estimates the translation table by expectation-maximization over token
/// co-occurrence. Uniform initialization over the target vocabulary makes
/// the result deterministic for a given pair order.
pub fn train_statistical_aligner(
    pairs: &[(Vec<String>, Vec<String>)],
    iterations: usize,
) -> Result<AlignmentModel> {
    if iterations == 0 {
        return Err(Error::Training("iteration count must be at least 1".into()));
    }
    if pairs.is_empty() {
        return Err(Error::Training("training corpus is empty".into()));
    }
    for (index, (source, target)) in pairs.iter().enumerate() {
        if source.is_empty() || target.is_empty() {
            return Err(Error::Training(format!(
                "pair {index} has an empty side; both sides need at least one token"
            )));
        }
    }
    let mut target_vocab = std::collections::BTreeSet::new();
    for (_, target) in pairs {
        for token in target {
            target_vocab.insert(token.clone());
        }
    }
    let uniform = 1.0 / target_vocab.len() as f64;
    let mut table: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (source, target) in pairs {
        for s in source {
            let row = table.entry(s.clone()).or_default();
            for t in target {
                row.entry(t.clone()).or_insert(uniform);
            }
        }
    }

    let mut log_likelihood = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let mut counts: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        let mut totals: BTreeMap<String, f64> = BTreeMap::new();
        for (source, target) in pairs {
            for t in target {
                let denom: f64 =
                    source.iter().map(|s| table[s][t]).sum();
                for s in source {
                    let fraction = table[s][t] / denom;
                    *counts.entry(s.clone()).or_default().entry(t.clone()).or_default() +=
                        fraction;
                    *totals.entry(s.clone()).or_default() += fraction;
                }
            }
        }
        for (s, row) in &mut table {
            let total = totals[s];
            for (t, prob) in row.iter_mut() {
                *prob = counts[s][t] / total;
            }
        }
        // Likelihood of the data under the fresh parameters, with the
        // uniform 1/|source| alignment prior folded in as a constant.
        let mut ll = 0.0;
        for (source, target) in pairs {
            let len_term = (source.len() as f64).ln();
            for t in target {
                let inner: f64 = source.iter().map(|s| table[s][t]).sum();
                ll += inner.ln() - len_term;
            }
        }
        log_likelihood.push(ll);
    }
    Ok(AlignmentModel { table, iterations, log_likelihood })
}

/// Bilingual word lexicon mapping a source word to one or more target
/// renderings, in file order.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<String>>,
}

impl Lexicon {
    pub fn new() -> Self {
        Lexicon::default()
    }

    pub fn insert(&mut self, source: impl Into<String>, target: impl Into<String>) {
        self.entries.entry(source.into()).or_default().push(target.into());
    }

    pub fn targets(&self, source: &str) -> &[String] {
        self.entries.get(source).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses tab-separated `source<TAB>target` lines; blank lines and
    /// `#` comments are skipped.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lexicon = Lexicon::new();
        for (index, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((source, target)) = line.split_once('\t') else {
                return Err(Error::Parse {
                    line: index + 1,
                    message: format!("expected source<TAB>target, got {line:?}"),
                });
            };
            if source.is_empty() || target.is_empty() {
                return Err(Error::Parse {
                    line: index + 1,
                    message: "empty lexicon field".into(),
                });
            }
            lexicon.insert(source, target);
        }
        Ok(lexicon)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text)
    }
}

/// External word aligner subprocess. Receives one `source ||| target` line
/// on stdin (tokens space-joined) and must answer with one line of
/// `i-j` index pairs, source index first.
#[derive(Debug, Clone)]
pub struct ExternalAligner {
    pub command: Vec<String>,
}

impl ExternalAligner {
    pub fn new(command: Vec<String>) -> Result<Self> {
        if command.is_empty() {
            return Err(Error::Config("external aligner command is empty".into()));
        }
        Ok(ExternalAligner { command })
    }

    pub fn align(
        &self,
        source_tokens: &[String],
        target_tokens: &[String],
    ) -> Result<Vec<(usize, usize)>> {
        let shown = self.command.join(" ");
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| Error::Subprocess { command: shown.clone(), message: e.to_string() })?;
        let line = format!("{} ||| {}\n", source_tokens.join(" "), target_tokens.join(" "));
        child
            .stdin
            .take()
            .expect("stdin was piped")
            .write_all(line.as_bytes())
            .map_err(|e| Error::Subprocess { command: shown.clone(), message: e.to_string() })?;
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
        let first_line = stdout.lines().next().unwrap_or("");
        let mut links = Vec::new();
        for pair in first_line.split_whitespace() {
            let Some((i, j)) = pair.split_once('-') else {
                return Err(Error::Subprocess {
                    command: shown,
                    message: format!("malformed alignment pair {pair:?}"),
                });
            };
            let parse = |v: &str| {
                v.parse::<usize>().map_err(|_| Error::Subprocess {
                    command: shown.clone(),
                    message: format!("malformed alignment pair {pair:?}"),
                })
            };
            links.push((parse(i)?, parse(j)?));
        }
        Ok(links)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMethod {
    Lexicon,
    Statistical,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionStatus {
    Ok,
    CopyFailure,
    NoAlignment,
}

/// Outcome of one extraction. The target word is present exactly when the
/// status is [`ExtractionStatus::Ok`]; the method is absent only for copy
/// failures, which are decided before any route runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub target_word: Option<String>,
    pub method: Option<ExtractionMethod>,
    pub status: ExtractionStatus,
}

impl ExtractionResult {
    fn ok(word: String, method: ExtractionMethod) -> Self {
        ExtractionResult {
            target_word: Some(word),
            method: Some(method),
            status: ExtractionStatus::Ok,
        }
    }

    fn copy_failure() -> Self {
        ExtractionResult { target_word: None, method: None, status: ExtractionStatus::CopyFailure }
    }

    fn no_alignment(method: ExtractionMethod) -> Self {
        ExtractionResult {
            target_word: None,
            method: Some(method),
            status: ExtractionStatus::NoAlignment,
        }
    }
}

/// Route taken when the lexicon has no answer.
pub enum AlignRoute {
    Statistical(AlignmentModel),
    External(ExternalAligner),
    /// No statistical or external backing; lexicon misses become
    /// no-alignment results.
    LexiconOnly,
}

/// Word extractor combining the copy check, an optional lexicon, and an
/// alignment route.
pub struct WordExtractor {
    pub lexicon: Option<Lexicon>,
    pub route: AlignRoute,
    /// Statistical matches below this probability are treated as absent.
    pub probability_floor: f64,
}

/// Default probability floor under which a statistical match is rejected.
pub const DEFAULT_PROBABILITY_FLOOR: f64 = 0.05;

/// True when `target` is present in the token list: equal to one token or to
/// a contiguous run of tokens (joined directly or with single spaces).
fn tokens_contain(tokens: &[String], target: &str) -> bool {
    if tokens.iter().any(|t| t == target) {
        return true;
    }
    for start in 0..tokens.len() {
        let mut compact = String::new();
        let mut spaced = String::new();
        for (offset, token) in tokens[start..].iter().enumerate() {
            compact.push_str(token);
            if offset > 0 {
                spaced.push(' ');
            }
            spaced.push_str(token);
            if offset > 0 && (compact == target || spaced == target) {
                return true;
            }
            if compact.len() > target.len() && spaced.len() > target.len() {
                break;
            }
        }
    }
    false
}

impl WordExtractor {
    pub fn new(lexicon: Option<Lexicon>, route: AlignRoute) -> Self {
        WordExtractor { lexicon, route, probability_floor: DEFAULT_PROBABILITY_FLOOR }
    }

    /// Finds the translation of `source_tokens[tracked_index]` among
    /// `hypothesis_tokens`.
    ///
    /// Precedence: a verbatim copy of the tracked token in the hypothesis is
    /// always a copy failure; otherwise a lexicon hit wins; otherwise the
    /// configured route decides.
    pub fn extract_target_word(
        &self,
        source_tokens: &[String],
        tracked_index: usize,
        hypothesis_tokens: &[String],
    ) -> Result<ExtractionResult> {
        let Some(tracked) = source_tokens.get(tracked_index) else {
            return Err(Error::Input(format!(
                "tracked index {tracked_index} out of bounds for {} source tokens",
                source_tokens.len()
            )));
        };
        // Span-aware so a copied word still counts when the hypothesis was
        // split into characters.
        if tokens_contain(hypothesis_tokens, tracked) {
            return Ok(ExtractionResult::copy_failure());
        }
        if let Some(lexicon) = &self.lexicon {
            for target in lexicon.targets(tracked) {
                if tokens_contain(hypothesis_tokens, target) {
                    return Ok(ExtractionResult::ok(target.clone(), ExtractionMethod::Lexicon));
                }
            }
        }
        match &self.route {
            AlignRoute::Statistical(model) => {
                let mut best: Option<(usize, f64)> = None;
                for (index, token) in hypothesis_tokens.iter().enumerate() {
                    let prob = model.translation_prob(tracked, token);
                    // Strictly-greater keeps the lowest index on ties.
                    if best.map(|(_, p)| prob > p).unwrap_or(true) {
                        best = Some((index, prob));
                    }
                }
                match best {
                    Some((index, prob)) if prob >= self.probability_floor => {
                        Ok(ExtractionResult::ok(
                            hypothesis_tokens[index].clone(),
                            ExtractionMethod::Statistical,
                        ))
                    }
                    _ => Ok(ExtractionResult::no_alignment(ExtractionMethod::Statistical)),
                }
            }
            AlignRoute::External(aligner) => {
                let links = aligner.align(source_tokens, hypothesis_tokens)?;
                let target_index = links
                    .iter()
                    .filter(|(i, _)| *i == tracked_index)
                    .map(|(_, j)| *j)
                    .min();
                match target_index {
                    Some(j) if j < hypothesis_tokens.len() => Ok(ExtractionResult::ok(
                        hypothesis_tokens[j].clone(),
                        ExtractionMethod::External,
                    )),
                    _ => Ok(ExtractionResult::no_alignment(ExtractionMethod::External)),
                }
            }
            AlignRoute::LexiconOnly => {
                Ok(ExtractionResult::no_alignment(ExtractionMethod::Lexicon))
            }
        }
    }
}
