//! Emotional attitude scoring and shift statistics.
//!
//! The attitude score of a word is the log-probability gap between a model
//! affirming the word is positive and affirming it is negative. Comparing
//! the score of a source word with the score of its translation tells us
//! whether translation pushed the word across the sentiment boundary; shift
//! rates count how often that happens per corpus.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::scorer::LogprobScorer;
use crate::templates::{render_judgment_prompts, split_judgment, AttitudeTemplatePair};
use crate::Result;

/// Log-probability of the judgment token given the prompt prefix, summed
/// over the token's pieces when the backend splits it.
pub fn pll(
    backend: &dyn LogprobScorer,
    prompt_without_judgment: &str,
    judgment_token: &str,
) -> Result<f64> {
    backend.logprob(prompt_without_judgment, judgment_token)
}

/// Attitude score of `word`: pll on the positive template minus pll on the
/// negative template. Positive values read as "the model thinks this word is
/// positive".
pub fn eas(
    backend: &dyn LogprobScorer,
    templates: &AttitudeTemplatePair,
    word: &str,
) -> Result<f64> {
    let rendered = render_judgment_prompts(templates, word)?;
    let (pos_prefix, token) = split_judgment(&rendered.positive, &rendered.judgment_token)?;
    let positive = pll(backend, pos_prefix, token)?;
    let (neg_prefix, token) = split_judgment(&rendered.negative, &rendered.judgment_token)?;
    let negative = pll(backend, neg_prefix, token)?;
    Ok(positive - negative)
}

/// Mean attitude score over a corpus of per-word scores.
pub fn corpus_eas(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Input("corpus attitude score over an empty corpus".into()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Threshold configuration for shift classification.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ShiftConfig {
    /// Dead zone half-width; scores in `[-delta, delta]` count as neutral
    /// territory.
    pub delta: f64,
}

impl ShiftConfig {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::Input(format!("shift delta must be positive, got {delta}")));
        }
        Ok(ShiftConfig { delta })
    }
}

impl Default for ShiftConfig {
    fn default() -> Self {
        ShiftConfig { delta: 0.2 }
    }
}

/// Why a record has no translated-side score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftStatus {
    Scored,
    CopyFailure,
    AlignmentFailure,
}

/// One corpus record entering shift statistics.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ShiftRecord {
    pub e_src: f64,
    pub e_hypo: Option<f64>,
    pub status: ShiftStatus,
}

impl ShiftRecord {
    pub fn scored(e_src: f64, e_hypo: f64) -> Self {
        ShiftRecord { e_src, e_hypo: Some(e_hypo), status: ShiftStatus::Scored }
    }

    pub fn unscored(e_src: f64, status: ShiftStatus) -> Result<Self> {
        if status == ShiftStatus::Scored {
            return Err(Error::Input("an unscored record cannot have status scored".into()));
        }
        Ok(ShiftRecord { e_src, e_hypo: None, status })
    }

    pub fn validate(&self) -> Result<()> {
        match (self.status, self.e_hypo) {
            (ShiftStatus::Scored, Some(_)) => Ok(()),
            (ShiftStatus::Scored, None) => {
                Err(Error::Input("scored record is missing the translated-side score".into()))
            }
            (_, Some(_)) => Err(Error::Input(
                "record with a failure status must not carry a translated-side score".into(),
            )),
            (_, None) => Ok(()),
        }
    }
}

/// Outcome of comparing a record's two scores against the dead zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftClass {
    /// Source clearly positive, translation clearly negative.
    ToNegative,
    /// Source clearly negative, translation clearly positive.
    ToPositive,
    Stable,
    /// No translated-side score (copy or alignment failure).
    Unscored,
}

pub fn classify_shift(record: &ShiftRecord, config: &ShiftConfig) -> ShiftClass {
    let Some(e_hypo) = record.e_hypo else {
        return ShiftClass::Unscored;
    };
    let delta = config.delta;
    if record.e_src > delta && e_hypo < -delta {
        ShiftClass::ToNegative
    } else if record.e_src < -delta && e_hypo > delta {
        ShiftClass::ToPositive
    } else {
        ShiftClass::Stable
    }
}

/// Integer tallies behind the shift rates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftCounts {
    pub total: usize,
    pub to_negative: usize,
    pub to_positive: usize,
    pub stable: usize,
    pub unscored: usize,
}

/// Shift rates in percent. The denominator is always the full record count,
/// unscored records included; see [`SHIFT_DENOMINATOR_POLICY`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftRates {
    /// Percent of records that flipped positive-to-negative.
    pub r_tn: f64,
    /// Percent of records that flipped negative-to-positive.
    pub r_tp: f64,
    pub counts: ShiftCounts,
}

/// Recorded in report metadata so a reader knows what the rates divide by.
pub const SHIFT_DENOMINATOR_POLICY: &str = "all records including unscored";

pub fn shift_rates(records: &[ShiftRecord], config: &ShiftConfig) -> Result<ShiftRates> {
    if records.is_empty() {
        return Err(Error::Input("shift rates over an empty record set".into()));
    }
    let mut counts = ShiftCounts { total: records.len(), ..ShiftCounts::default() };
    for record in records {
        record.validate()?;
        match classify_shift(record, config) {
            ShiftClass::ToNegative => counts.to_negative += 1,
            ShiftClass::ToPositive => counts.to_positive += 1,
            ShiftClass::Stable => counts.stable += 1,
            ShiftClass::Unscored => counts.unscored += 1,
        }
    }
    let n = counts.total as f64;
    Ok(ShiftRates {
        r_tn: counts.to_negative as f64 * 100.0 / n,
        r_tp: counts.to_positive as f64 * 100.0 / n,
        counts,
    })
}

/// Shift rates of one identity group, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub r_tp: f64,
    pub r_tn: f64,
}

impl From<ShiftRates> for GroupRates {
    fn from(rates: ShiftRates) -> Self {
        GroupRates { r_tp: rates.r_tp, r_tn: rates.r_tn }
    }
}

/// How much worse the non-binary group fares than the binary group: its
/// positive-rescues deficit plus its negative-flips excess.
pub fn shift_bias_rate(bg: GroupRates, nbg: GroupRates) -> f64 {
    bg.r_tp - nbg.r_tp + nbg.r_tn - bg.r_tn
}
