//! Translation quality metrics: corpus BLEU, identity stripping for quality
//! scoring, ingestion of externally computed segment scores, and keyword
//! difference sets across identity settings.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Token scheme for n-gram metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BleuTokenizer {
    /// Every non-whitespace character is a token; for languages written
    /// without word separators.
    Character,
    /// Whitespace-delimited words with punctuation split into its own
    /// tokens.
    WhitespacePunct,
}

impl BleuTokenizer {
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        match self {
            BleuTokenizer::Character => {
                text.chars().filter(|c| !c.is_whitespace()).map(String::from).collect()
            }
            BleuTokenizer::WhitespacePunct => {
                let mut tokens = Vec::new();
                let mut current = String::new();
                for c in text.chars() {
                    if c.is_whitespace() {
                        if !current.is_empty() {
                            tokens.push(std::mem::take(&mut current));
                        }
                    } else if c.is_alphanumeric() || c == '\'' || c == '-' {
                        current.push(c);
                    } else {
                        if !current.is_empty() {
                            tokens.push(std::mem::take(&mut current));
                        }
                        tokens.push(c.to_string());
                    }
                }
                if !current.is_empty() {
                    tokens.push(current);
                }
                tokens
            }
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_default() += 1;
        }
    }
    counts
}

/// Corpus-level BLEU with up to 4-gram precision, on a 0 to 100 scale.
///
/// Matched n-gram counts are clipped per segment against the reference.
/// Orders whose matched count is zero but which have candidate n-grams get
/// the smoothed precision `1 / (2 * total_n)`; orders with no candidate
/// n-grams anywhere in the corpus are left out of the geometric mean. The
/// brevity penalty `exp(1 - ref_len / hyp_len)` applies when the hypothesis
/// corpus is shorter than the reference corpus.
pub fn bleu(
    hypotheses: &[String],
    references: &[String],
    tokenizer: BleuTokenizer,
) -> Result<f64> {
    if hypotheses.len() != references.len() {
        return Err(Error::Input(format!(
            "hypothesis count {} does not match reference count {}",
            hypotheses.len(),
            references.len()
        )));
    }
    if hypotheses.is_empty() {
        return Err(Error::UndefinedMetric("bleu over an empty corpus".into()));
    }
    let hyp_tokens: Vec<Vec<String>> =
        hypotheses.iter().map(|h| tokenizer.tokenize(h)).collect();
    let ref_tokens: Vec<Vec<String>> =
        references.iter().map(|r| tokenizer.tokenize(r)).collect();
    let hyp_len: usize = hyp_tokens.iter().map(Vec::len).sum();
    let ref_len: usize = ref_tokens.iter().map(Vec::len).sum();
    if hyp_len == 0 {
        return Ok(0.0);
    }

    let mut log_precision_sum = 0.0;
    let mut included_orders = 0usize;
    for n in 1..=4 {
        let mut total = 0usize;
        let mut matched = 0usize;
        for (hyp, reference) in hyp_tokens.iter().zip(&ref_tokens) {
            let hyp_counts = ngram_counts(hyp, n);
            let ref_counts = ngram_counts(reference, n);
            for (gram, &count) in &hyp_counts {
                total += count;
                matched += count.min(ref_counts.get(gram).copied().unwrap_or(0));
            }
        }
        if total == 0 {
            continue;
        }
        included_orders += 1;
        let precision = if matched == 0 {
            1.0 / (2.0 * total as f64)
        } else {
            matched as f64 / total as f64
        };
        log_precision_sum += precision.ln();
    }
    if included_orders == 0 {
        return Ok(0.0);
    }
    let geometric_mean = (log_precision_sum / included_orders as f64).exp();
    let brevity_penalty = if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(100.0 * brevity_penalty * geometric_mean)
}

/// Removes the first occurrence of a correctly translated identity surface
/// from the hypothesis and the reference before quality scoring, so the
/// score reflects the rest of the sentence.
///
/// Nothing changes unless the surface is present in the hypothesis. When it
/// appears more than once there, only the first occurrence is spliced out
/// and the repetition is logged.
pub fn strip_correct_identity(
    hypothesis: &str,
    reference: &str,
    surface: &str,
) -> (String, String) {
    if surface.is_empty() {
        return (hypothesis.to_string(), reference.to_string());
    }
    let Some(hyp_at) = hypothesis.find(surface) else {
        return (hypothesis.to_string(), reference.to_string());
    };
    if hypothesis[hyp_at + surface.len()..].contains(surface) {
        log::warn!("identity surface {surface:?} appears more than once in the hypothesis");
    }
    let mut stripped_hyp = hypothesis.to_string();
    stripped_hyp.replace_range(hyp_at..hyp_at + surface.len(), "");
    let stripped_ref = match reference.find(surface) {
        Some(ref_at) => {
            let mut s = reference.to_string();
            s.replace_range(ref_at..ref_at + surface.len(), "");
            s
        }
        None => reference.to_string(),
    };
    (stripped_hyp, stripped_ref)
}

#[derive(Debug, Deserialize)]
struct ScoreRow {
    segment_id: String,
    identity: String,
    metric: String,
    value: f64,
}

/// Externally computed per-segment scores, keyed by segment, identity and
/// metric name.
#[derive(Debug, Clone, Default)]
pub struct SegmentScoreTable {
    scores: BTreeMap<(String, String, String), f64>,
}

impl SegmentScoreTable {
    pub fn get(&self, segment_id: &str, identity: &str, metric: &str) -> Option<f64> {
        self.scores
            .get(&(segment_id.to_string(), identity.to_string(), metric.to_string()))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Distinct metric names present in the table.
    pub fn metrics(&self) -> BTreeSet<String> {
        self.scores.keys().map(|(_, _, metric)| metric.clone()).collect()
    }

    /// All values for one identity and metric, ordered by segment id.
    pub fn values_for(&self, identity: &str, metric: &str) -> Vec<f64> {
        self.scores
            .iter()
            .filter(|((_, row_identity, row_metric), _)| {
                row_identity == identity && row_metric == metric
            })
            .map(|(_, &value)| value)
            .collect()
    }
}

/// Reads a `segment_id,identity,metric,value` CSV with a header row.
/// Duplicate keys and non-finite values are ingestion errors carrying the
/// offending row number.
pub fn ingest_scores(reader: impl Read) -> Result<SegmentScoreTable> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let mut table = SegmentScoreTable::default();
    for (index, row) in csv_reader.deserialize::<ScoreRow>().enumerate() {
        let data_row = index + 2; // header is row 1
        let row = row.map_err(|e| Error::Ingestion { row: data_row, message: e.to_string() })?;
        if !row.value.is_finite() {
            return Err(Error::Ingestion {
                row: data_row,
                message: format!("non-finite value {}", row.value),
            });
        }
        let key = (row.segment_id, row.identity, row.metric);
        if table.scores.contains_key(&key) {
            return Err(Error::Ingestion {
                row: data_row,
                message: format!(
                    "duplicate key segment={} identity={} metric={}",
                    key.0, key.1, key.2
                ),
            });
        }
        table.scores.insert(key, row.value);
    }
    Ok(table)
}

pub fn load_scores(path: impl AsRef<std::path::Path>) -> Result<SegmentScoreTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_scores(file)
}

/// Tokens unique to each identity's translations.
///
/// For every identity except the neutral one, the result is that identity's
/// token set minus stopwords and minus every token any other identity
/// (neutral included) also produced. The sets are pairwise disjoint by
/// construction.
pub fn keyword_diff_sets(
    outputs: &BTreeMap<String, Vec<String>>,
    neutral: Option<&str>,
    stopwords: &BTreeSet<String>,
    tokenizer: BleuTokenizer,
) -> BTreeMap<String, BTreeSet<String>> {
    let token_sets: BTreeMap<&str, BTreeSet<String>> = outputs
        .iter()
        .map(|(identity, sentences)| {
            let tokens = sentences
                .iter()
                .flat_map(|s| tokenizer.tokenize(s))
                .filter(|t| !stopwords.contains(t))
                .collect();
            (identity.as_str(), tokens)
        })
        .collect();
    let mut result = BTreeMap::new();
    for (identity, tokens) in &token_sets {
        if Some(*identity) == neutral {
            continue;
        }
        let mut unique = tokens.clone();
        for (other, other_tokens) in &token_sets {
            if other != identity {
                for token in other_tokens {
                    unique.remove(token);
                }
            }
        }
        result.insert(identity.to_string(), unique);
    }
    result
}
