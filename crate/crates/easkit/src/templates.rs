//! Judgment templates used to probe how positively or negatively a model
//! reads a single word.
//!
//! A template is a question that embeds the word and ends in a fixed
//! judgment token, e.g. `Q: Is [word] a positive word? A: Yes`. The token is
//! never sampled; it is force-continued after the prefix and its
//! log-probability is read off.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Marker replaced by the probed word when a template is rendered.
pub const WORD_SLOT: &str = "[word]";

/// A positive/negative template pair for one language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttitudeTemplatePair {
    /// BCP-47-ish language code, e.g. "en".
    pub language: String,
    pub positive_template: String,
    pub negative_template: String,
    /// Token whose log-probability is measured; templates must end with it.
    pub judgment_token: String,
}

/// Prompts produced by [`render_judgment_prompts`]. Both prompts still end
/// with the judgment token; strip it with [`split_judgment`] before scoring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompts {
    pub positive: String,
    pub negative: String,
    pub judgment_token: String,
}

impl AttitudeTemplatePair {
    pub fn new(
        language: impl Into<String>,
        positive_template: impl Into<String>,
        negative_template: impl Into<String>,
        judgment_token: impl Into<String>,
    ) -> Result<Self> {
        let pair = AttitudeTemplatePair {
            language: language.into(),
            positive_template: positive_template.into(),
            negative_template: negative_template.into(),
            judgment_token: judgment_token.into(),
        };
        pair.validate()?;
        Ok(pair)
    }

    /// Checks the structural rules: exactly one word slot per template, both
    /// templates end with the judgment token, and the two sides differ in
    /// exactly one whitespace-delimited token (the polarity word).
    pub fn validate(&self) -> Result<()> {
        for (name, template) in
            [("positive", &self.positive_template), ("negative", &self.negative_template)]
        {
            let slots = template.matches(WORD_SLOT).count();
            if slots != 1 {
                return Err(Error::Template(format!(
                    "{name} template must contain exactly one {WORD_SLOT} slot, found {slots}"
                )));
            }
            if self.judgment_token.is_empty() {
                return Err(Error::Template("judgment token is empty".into()));
            }
            if !template.trim_end().ends_with(&self.judgment_token) {
                return Err(Error::Template(format!(
                    "{name} template does not end with judgment token {:?}",
                    self.judgment_token
                )));
            }
        }
        let pos: Vec<&str> = self.positive_template.split_whitespace().collect();
        let neg: Vec<&str> = self.negative_template.split_whitespace().collect();
        if pos.len() != neg.len() {
            return Err(Error::Template(
                "templates must have the same token count, differing only in the polarity word"
                    .into(),
            ));
        }
        let differing = pos.iter().zip(neg.iter()).filter(|(a, b)| a != b).count();
        if differing != 1 {
            return Err(Error::Template(format!(
                "templates must differ in exactly one token, found {differing} differing"
            )));
        }
        Ok(())
    }

    /// Built-in English pair.
    pub fn english() -> Self {
        AttitudeTemplatePair {
            language: "en".into(),
            positive_template: "Q: Is [word] a positive word? A: Yes".into(),
            negative_template: "Q: Is [word] a negative word? A: Yes".into(),
            judgment_token: "Yes".into(),
        }
    }

    /// Built-in Chinese pair (translation of the English one).
    pub fn chinese() -> Self {
        AttitudeTemplatePair {
            language: "zh".into(),
            positive_template: "问：[word]是一个积极的词吗？答：是".into(),
            negative_template: "问：[word]是一个消极的词吗？答：是".into(),
            judgment_token: "是".into(),
        }
    }

    /// Built-in pair for a language code, if one ships with the crate.
    pub fn builtin(language: &str) -> Option<Self> {
        match language {
            "en" => Some(Self::english()),
            "zh" => Some(Self::chinese()),
            _ => None,
        }
    }
}

/// Fills the word slot of both templates verbatim. The word is not trimmed
/// or normalized; scoring a word with internal whitespace is the caller's
/// decision.
pub fn render_judgment_prompts(
    templates: &AttitudeTemplatePair,
    word: &str,
) -> Result<RenderedPrompts> {
    templates.validate()?;
    if word.is_empty() {
        return Err(Error::Input("cannot render judgment prompts for an empty word".into()));
    }
    Ok(RenderedPrompts {
        positive: templates.positive_template.replace(WORD_SLOT, word),
        negative: templates.negative_template.replace(WORD_SLOT, word),
        judgment_token: templates.judgment_token.clone(),
    })
}

/// Splits a rendered prompt into the prefix to condition on and the judgment
/// token to force-continue.
pub fn split_judgment<'a>(prompt: &'a str, judgment_token: &str) -> Result<(&'a str, &'a str)> {
    match prompt.strip_suffix(judgment_token) {
        Some(prefix) => Ok((prefix, &prompt[prefix.len()..])),
        None => Err(Error::Template(format!(
            "prompt does not end with judgment token {judgment_token:?}: {prompt:?}"
        ))),
    }
}
