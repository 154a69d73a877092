//! Slotted corpus parsing and expansion into per-identity settings.
//!
//! A slotted pair keeps the sentence identity-free: the referent is the
//! marker `[IDENTITY]` and every referent pronoun is `[PRON:role]`, on both
//! the source and the target side. Expansion substitutes one identity's
//! forms into each slot, repairs source-side agreement, and re-locates the
//! tracked attitude word. One input pair therefore becomes one realized pair
//! per identity, which is what makes the settings comparable: they differ
//! only in the identity words.

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::grammar::GrammarFixer;
use crate::identity::{IdentityProfile, PronounRole};
use crate::Result;

/// Marker for the identity noun phrase.
pub const IDENTITY_SLOT: &str = "[IDENTITY]";

/// Where a slotted pair came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Authentic,
    Synthesized,
}

/// One line of a slotted corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlottedSentencePair {
    pub id: String,
    /// Source text with `[IDENTITY]` and `[PRON:role]` slots.
    pub src: String,
    /// Target (reference) text with the same slot kinds.
    pub tgt: String,
    /// Tracked attitude word, as it appears in `src`.
    pub word: String,
    /// UTF-8 byte span of `word` inside `src`.
    pub word_span: (usize, usize),
    pub origin: Origin,
}

/// A slotted pair realized for one identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedPair {
    pub id: String,
    pub identity: String,
    pub source: String,
    pub target: String,
    /// UTF-8 byte span of the tracked word inside `source`.
    pub word_span: (usize, usize),
}

impl RealizedPair {
    pub fn tracked_word(&self) -> &str {
        &self.source[self.word_span.0..self.word_span.1]
    }
}

fn parse_pronoun_slot(text: &str) -> Option<(PronounRole, usize)> {
    let rest = text.strip_prefix("[PRON:")?;
    let end = rest.find(']')?;
    let role = PronounRole::parse(&rest[..end])?;
    Some((role, "[PRON:".len() + end + 1))
}

fn validate_side(side: &str, text: &str, line: usize) -> Result<()> {
    let identity_slots = text.matches(IDENTITY_SLOT).count();
    if identity_slots != 1 {
        return Err(Error::Parse {
            line,
            message: format!(
                "{side} must contain exactly one {IDENTITY_SLOT} slot, found {identity_slots}"
            ),
        });
    }
    // Any bracketed pronoun-looking marker must parse to a known role.
    let mut rest = text;
    while let Some(pos) = rest.find("[PRON:") {
        let candidate = &rest[pos..];
        match parse_pronoun_slot(candidate) {
            Some((_, len)) => rest = &candidate[len..],
            None => {
                let shown: String = candidate.chars().take(24).collect();
                return Err(Error::Parse {
                    line,
                    message: format!("{side} has a malformed pronoun slot near {shown:?}"),
                });
            }
        }
    }
    Ok(())
}

/// Parses and validates one JSON line of a slotted corpus. `line` is the
/// 1-based line number used in error messages.
pub fn parse_slotted(text: &str, line: usize) -> Result<SlottedSentencePair> {
    let pair: SlottedSentencePair = serde_json::from_str(text)
        .map_err(|e| Error::Parse { line, message: e.to_string() })?;
    if pair.id.is_empty() {
        return Err(Error::Parse { line, message: "empty id".into() });
    }
    validate_side("src", &pair.src, line)?;
    validate_side("tgt", &pair.tgt, line)?;
    let (start, end) = pair.word_span;
    if start >= end
        || end > pair.src.len()
        || !pair.src.is_char_boundary(start)
        || !pair.src.is_char_boundary(end)
    {
        return Err(Error::Parse {
            line,
            message: format!("word_span [{start}, {end}) is not a valid span of src"),
        });
    }
    if &pair.src[start..end] != pair.word {
        return Err(Error::Parse {
            line,
            message: format!(
                "word_span [{start}, {end}) selects {:?}, not the tracked word {:?}",
                &pair.src[start..end],
                pair.word
            ),
        });
    }
    if pair.word.contains('[') || pair.word.trim().is_empty() {
        return Err(Error::Parse { line, message: "tracked word must be plain text".into() });
    }
    Ok(pair)
}

/// Reads a whole slotted corpus from a JSON-lines reader. Blank lines are
/// skipped; the first malformed line aborts with its line number.
pub fn read_slotted_corpus(reader: impl Read) -> Result<Vec<SlottedSentencePair>> {
    let reader = BufReader::new(reader);
    let mut pairs = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: index + 1,
            message: format!("unreadable line: {e}"),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        pairs.push(parse_slotted(&line, index + 1)?);
    }
    Ok(pairs)
}

/// Convenience wrapper over [`read_slotted_corpus`] for a file path.
pub fn load_slotted_corpus(path: impl AsRef<Path>) -> Result<Vec<SlottedSentencePair>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_slotted_corpus(file)
}

/// Substitutes identity and pronoun slots with one identity's forms.
fn substitute_slots(text: &str, surface: &str, profile: &IdentityProfile, source_side: bool) -> String {
    let pronouns = if source_side { &profile.source.pronouns } else { &profile.target.pronouns };
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while !rest.is_empty() {
        if let Some(stripped) = rest.strip_prefix(IDENTITY_SLOT) {
            out.push_str(surface);
            rest = stripped;
            continue;
        }
        if rest.starts_with("[PRON:") {
            if let Some((role, len)) = parse_pronoun_slot(rest) {
                out.push_str(pronouns.get(role));
                rest = &rest[len..];
                continue;
            }
        }
        let mut chars = rest.chars();
        let c = chars.next().expect("rest is non-empty");
        out.push(c);
        rest = chars.as_str();
    }
    out
}

/// Uppercases the first letter of every sentence. Letters without case (for
/// example Han characters) are left alone.
fn capitalize_sentence_starts(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut at_sentence_start = true;
    for c in text.chars() {
        if at_sentence_start && c.is_alphabetic() {
            out.extend(c.to_uppercase());
            at_sentence_start = false;
            continue;
        }
        if matches!(c, '.' | '!' | '?') {
            at_sentence_start = true;
        } else if !c.is_whitespace() && !c.is_alphabetic() {
            // quotes and brackets keep the sentence-start state
        } else if c.is_alphabetic() {
            at_sentence_start = false;
        }
        out.push(c);
    }
    out
}

fn is_word_boundary(text: &str, start: usize, end: usize) -> bool {
    let before_ok = start == 0
        || !text[..start].chars().next_back().map(char::is_alphanumeric).unwrap_or(false);
    let after_ok = end == text.len()
        || !text[end..].chars().next().map(char::is_alphanumeric).unwrap_or(false);
    before_ok && after_ok
}

/// Finds the single word-boundary occurrence of `word` in `text`.
fn locate_unique_word(text: &str, word: &str) -> Result<(usize, usize)> {
    let mut matches = Vec::new();
    let mut from = 0;
    while let Some(pos) = text[from..].find(word) {
        let start = from + pos;
        let end = start + word.len();
        if is_word_boundary(text, start, end) {
            matches.push((start, end));
        }
        from = start + 1;
    }
    match matches.len() {
        1 => Ok(matches[0]),
        0 => Err(Error::Realization(format!(
            "tracked word {word:?} not found in realized text {text:?}"
        ))),
        n => Err(Error::Realization(format!(
            "tracked word {word:?} occurs {n} times in realized text, expected once"
        ))),
    }
}

/// Realizes one slotted pair for one identity: slots substituted, sentence
/// starts capitalized, source-side agreement repaired, tracked word
/// re-located. The target side is substituted directly with no agreement
/// changes.
pub fn realize_identity(
    pair: &SlottedSentencePair,
    profile: &IdentityProfile,
    fixer: &GrammarFixer,
) -> Result<RealizedPair> {
    let source = substitute_slots(&pair.src, &profile.source.surface, profile, true);
    let source = capitalize_sentence_starts(&source);
    let source = fixer.apply(&source, profile);
    let target = substitute_slots(&pair.tgt, &profile.target.surface, profile, false);
    for (side, text) in [("source", &source), ("target", &target)] {
        if text.contains(IDENTITY_SLOT) || text.contains("[PRON:") {
            return Err(Error::Realization(format!(
                "{side} still contains slot markers after substitution: {text:?}"
            )));
        }
    }
    let word_span = locate_unique_word(&source, &pair.word)?;
    Ok(RealizedPair {
        id: pair.id.clone(),
        identity: profile.key.clone(),
        source,
        target,
        word_span,
    })
}

/// Replaces an identity's forms back with slot markers. Matching ignores
/// sentence-initial capitalization. Inverse of [`realize_identity`] for
/// plural-agreement profiles, whose realization needs no grammar repair.
pub fn reslot(text: &str, profile: &IdentityProfile) -> String {
    let mut replacements: Vec<(String, String)> = vec![(
        profile.source.surface.clone(),
        IDENTITY_SLOT.to_string(),
    )];
    for role in PronounRole::ALL {
        replacements.push((
            profile.source.pronouns.get(role).to_string(),
            format!("[PRON:{}]", role.name()),
        ));
    }
    // Longest surface first so "themselves" is consumed before "them".
    replacements.sort_by_key(|(surface, _)| std::cmp::Reverse(surface.len()));

    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    'outer: while !rest.is_empty() {
        for (surface, marker) in &replacements {
            if rest.len() < surface.len() {
                continue;
            }
            let head = &rest[..surface.len()];
            let matches_case_relaxed = head == surface
                || (head.chars().next().map(|c| c.to_lowercase().to_string())
                    == surface.chars().next().map(|c| c.to_lowercase().to_string())
                    && head[head.chars().next().map(char::len_utf8).unwrap_or(0)..]
                        == surface[surface.chars().next().map(char::len_utf8).unwrap_or(0)..]);
            if matches_case_relaxed && is_word_boundary(rest, 0, surface.len()) {
                let consumed = out.len();
                let boundary_before = consumed == 0
                    || !out[..consumed]
                        .chars()
                        .next_back()
                        .map(char::is_alphanumeric)
                        .unwrap_or(false);
                if boundary_before {
                    out.push_str(marker);
                    rest = &rest[surface.len()..];
                    continue 'outer;
                }
            }
        }
        let mut chars = rest.chars();
        let c = chars.next().expect("rest is non-empty");
        out.push(c);
        rest = chars.as_str();
    }
    out
}

/// One realization failure inside [`expand_corpus`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpandFailure {
    pub id: String,
    pub identity: String,
    pub message: String,
}

/// Result of expanding a corpus over all identity settings.
#[derive(Debug, Clone)]
pub struct Expansion {
    /// Realized pairs per identity, in profile order; every inner list keeps
    /// the input corpus order.
    pub settings: Vec<(String, Vec<RealizedPair>)>,
    pub failures: Vec<ExpandFailure>,
}

impl Expansion {
    pub fn setting(&self, identity: &str) -> Option<&[RealizedPair]> {
        self.settings
            .iter()
            .find(|(key, _)| key == identity)
            .map(|(_, pairs)| pairs.as_slice())
    }

    pub fn total_pairs(&self) -> usize {
        self.settings.iter().map(|(_, pairs)| pairs.len()).sum()
    }
}

/// Expands every slotted pair into every identity setting. A pair that fails
/// for any identity is dropped from all settings so the settings stay
/// parallel; the failure is reported, not silently swallowed.
pub fn expand_corpus(
    corpus: &[SlottedSentencePair],
    profiles: &[IdentityProfile],
    fixer: &GrammarFixer,
) -> Result<Expansion> {
    if profiles.is_empty() {
        return Err(Error::Input("cannot expand with an empty profile set".into()));
    }
    let mut failures = Vec::new();
    let mut per_pair: Vec<Option<Vec<RealizedPair>>> = Vec::with_capacity(corpus.len());
    for pair in corpus {
        let mut realized = Vec::with_capacity(profiles.len());
        let mut failed = false;
        for profile in profiles {
            match realize_identity(pair, profile, fixer) {
                Ok(r) => realized.push(r),
                Err(e) => {
                    failures.push(ExpandFailure {
                        id: pair.id.clone(),
                        identity: profile.key.clone(),
                        message: e.to_string(),
                    });
                    failed = true;
                }
            }
        }
        per_pair.push(if failed { None } else { Some(realized) });
    }
    let mut settings: Vec<(String, Vec<RealizedPair>)> =
        profiles.iter().map(|p| (p.key.clone(), Vec::new())).collect();
    for realized in per_pair.into_iter().flatten() {
        for (slot, pair) in settings.iter_mut().zip(realized) {
            debug_assert_eq!(slot.0, pair.identity);
            slot.1.push(pair);
        }
    }
    Ok(Expansion { settings, failures })
}

/// Ratio of unique to total word n-grams, over whitespace tokens per
/// sentence. Sentences shorter than `n` tokens contribute nothing.
pub fn distinct_n(corpus: &[String], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Input("n must be at least 1".into()));
    }
    if corpus.is_empty() {
        return Err(Error::Input("distinct-n over an empty corpus".into()));
    }
    let mut total = 0usize;
    let mut unique = std::collections::HashSet::new();
    for sentence in corpus {
        let tokens: Vec<&str> = sentence.split_whitespace().collect();
        if tokens.len() < n {
            continue;
        }
        for window in tokens.windows(n) {
            total += 1;
            unique.insert(window.join(" "));
        }
    }
    if total == 0 {
        return Err(Error::UndefinedMetric(format!(
            "distinct-{n} undefined: no sentence has {n} tokens"
        )));
    }
    Ok(unique.len() as f64 / total as f64)
}

/// Sentence openers used when synthesizing description sentences around a
/// seed word.
pub const SYNTHESIS_PREFIXES: [&str; 7] = [
    "Everyone says the person",
    "The person is known for",
    "The person once impressed others with",
    "The person once disappointed others with",
    "Everyone agrees that the person is",
    "The person is described as",
    "The person is renowned for",
];

/// Builds the seven generation prompts that ask a model to write a sentence
/// around `seed_word`, one per opener.
pub fn synthesis_prompts(seed_word: &str) -> Result<Vec<String>> {
    if seed_word.trim().is_empty() {
        return Err(Error::Input("synthesis prompts need a non-empty seed word".into()));
    }
    Ok(SYNTHESIS_PREFIXES
        .iter()
        .map(|prefix| {
            format!(
                "Use {seed_word} to construct a sentence describing a person with details, \
                 beginning with '{prefix}.'"
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::builtin_profiles;

    fn profile(key: &str) -> IdentityProfile {
        builtin_profiles().into_iter().find(|p| p.key == key).unwrap()
    }

    fn tenacious_pair() -> SlottedSentencePair {
        let src = "[IDENTITY] is tenacious. [PRON:subject] never give up.";
        SlottedSentencePair {
            id: "s1".into(),
            src: src.into(),
            tgt: "[IDENTITY]很固执。[PRON:subject]从不放弃。".into(),
            word: "tenacious".into(),
            word_span: (src.find("tenacious").unwrap(), src.find("tenacious").unwrap() + 9),
            origin: Origin::Authentic,
        }
    }

    #[test]
    fn parse_accepts_a_valid_line() {
        let line = r#"{"id":"a","src":"[IDENTITY] is kind. [PRON:subject] helped.","tgt":"[IDENTITY]很好。[PRON:subject]帮了忙。","word":"kind","word_span":[14,18],"origin":"authentic"}"#;
        let pair = parse_slotted(line, 3).unwrap();
        assert_eq!(pair.word, "kind");
        assert_eq!(&pair.src[14..18], "kind");
    }

    #[test]
    fn parse_rejects_duplicate_identity_slot() {
        let line = r#"{"id":"a","src":"[IDENTITY] and [IDENTITY] is kind.","tgt":"[IDENTITY]很好。","word":"kind","word_span":[30,34],"origin":"authentic"}"#;
        let err = parse_slotted(line, 7).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 7);
                assert!(message.contains("exactly one"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_span_not_matching_word() {
        let line = r#"{"id":"a","src":"[IDENTITY] is kind.","tgt":"[IDENTITY]很好。","word":"kind","word_span":[11,13],"origin":"authentic"}"#;
        assert!(parse_slotted(line, 1).is_err());
    }

    #[test]
    fn parse_rejects_unknown_pronoun_role() {
        let line = r#"{"id":"a","src":"[IDENTITY] is kind to [PRON:vocative].","tgt":"[IDENTITY]很好。","word":"kind","word_span":[14,18],"origin":"authentic"}"#;
        let err = parse_slotted(line, 2).unwrap_err();
        assert!(err.to_string().contains("pronoun slot"), "{err}");
    }

    #[test]
    fn realizes_the_trans_man_setting() {
        let realized = realize_identity(
            &tenacious_pair(),
            &profile("trans_man"),
            &GrammarFixer::rules_only(),
        )
        .unwrap();
        assert_eq!(realized.source, "The trans man is tenacious. He never gives up.");
        assert_eq!(realized.target, "跨性别男人很固执。他从不放弃。");
        assert_eq!(realized.tracked_word(), "tenacious");
    }

    #[test]
    fn realizes_the_neutral_setting_without_agreement_changes() {
        let realized = realize_identity(
            &tenacious_pair(),
            &profile("person"),
            &GrammarFixer::rules_only(),
        )
        .unwrap();
        assert_eq!(realized.source, "The person is tenacious. They never give up.");
    }

    #[test]
    fn realizes_possessive_and_object_roles() {
        let src = "[IDENTITY] is proud. Everyone respects [PRON:object] and [PRON:possessive] grit.";
        let pair = SlottedSentencePair {
            id: "s2".into(),
            src: src.into(),
            tgt: "[IDENTITY]很自豪。大家都尊重[PRON:object]。".into(),
            word: "proud".into(),
            word_span: (src.find("proud").unwrap(), src.find("proud").unwrap() + 5),
            origin: Origin::Synthesized,
        };
        let realized =
            realize_identity(&pair, &profile("woman"), &GrammarFixer::rules_only()).unwrap();
        assert_eq!(
            realized.source,
            "The woman is proud. Everyone respects her and her grit."
        );
    }

    #[test]
    fn round_trips_neutral_realization_back_to_slots() {
        let pair = tenacious_pair();
        let neutral = profile("person");
        let realized =
            realize_identity(&pair, &neutral, &GrammarFixer::rules_only()).unwrap();
        assert_eq!(reslot(&realized.source, &neutral), pair.src);
    }

    #[test]
    fn expansion_keeps_settings_parallel_and_counts_all_identities() {
        let corpus = vec![tenacious_pair()];
        let profiles = builtin_profiles();
        let expansion =
            expand_corpus(&corpus, &profiles, &GrammarFixer::rules_only()).unwrap();
        assert_eq!(expansion.settings.len(), 14);
        assert_eq!(expansion.total_pairs(), 14);
        assert!(expansion.failures.is_empty());
        for (_, pairs) in &expansion.settings {
            assert_eq!(pairs.len(), 1);
            assert_eq!(pairs[0].id, "s1");
        }
    }

    #[test]
    fn failing_pair_is_dropped_from_every_setting() {
        let good = tenacious_pair();
        // The tracked word also appears inside the realized identity surface
        // for "queer", so realization cannot locate it uniquely.
        let src = "[IDENTITY] is queer-positive and queer friendly.";
        let start = src.rfind("queer").unwrap();
        let bad = SlottedSentencePair {
            id: "bad".into(),
            src: src.into(),
            tgt: "[IDENTITY]很友好。".into(),
            word: "queer".into(),
            word_span: (start, start + 5),
            origin: Origin::Synthesized,
        };
        let profiles = builtin_profiles();
        let expansion = expand_corpus(&vec![good, bad], &profiles, &GrammarFixer::rules_only())
            .unwrap();
        assert!(!expansion.failures.is_empty());
        for (_, pairs) in &expansion.settings {
            assert_eq!(pairs.len(), 1, "bad pair must be dropped everywhere");
            assert_eq!(pairs[0].id, "s1");
        }
        assert!(expansion.failures.iter().all(|f| f.id == "bad"));
    }

    #[test]
    fn realization_rejects_leftover_markers() {
        // An unknown-bracket text is not a pronoun slot, so it passes the
        // substitution untouched and must not be flagged.
        let src = "[IDENTITY] is kind [sic].";
        let pair = SlottedSentencePair {
            id: "s3".into(),
            src: src.into(),
            tgt: "[IDENTITY]很好。".into(),
            word: "kind".into(),
            word_span: (src.find("kind").unwrap(), src.find("kind").unwrap() + 4),
            origin: Origin::Authentic,
        };
        let realized =
            realize_identity(&pair, &profile("man"), &GrammarFixer::rules_only()).unwrap();
        assert_eq!(realized.source, "The man is kind [sic].");
    }

    #[test]
    fn distinct_n_counts_unique_ngram_ratio() {
        let corpus = vec!["a b c d".to_string()];
        assert_eq!(distinct_n(&corpus, 4).unwrap(), 1.0);
        let doubled = vec!["a b c d".to_string(), "a b c d".to_string()];
        assert_eq!(distinct_n(&doubled, 4).unwrap(), 0.5);
    }

    #[test]
    fn distinct_n_skips_short_sentences() {
        let corpus = vec!["a b".to_string(), "c d e".to_string()];
        // Only "c d e" has 3-grams: one total, one unique.
        assert_eq!(distinct_n(&corpus, 3).unwrap(), 1.0);
        assert!(matches!(
            distinct_n(&vec!["a b".to_string()], 3),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(distinct_n(&[], 2).is_err());
    }

    #[test]
    fn distinct_n_matches_set_oracle() {
        let corpus: Vec<String> = (0..30)
            .map(|i| {
                (0..6).map(|j| format!("w{}", (i * 7 + j * 3) % 11)).collect::<Vec<_>>().join(" ")
            })
            .collect();
        for n in 1..=4 {
            let mut seen = std::collections::HashSet::new();
            let mut total = 0usize;
            for sentence in &corpus {
                let tokens: Vec<&str> = sentence.split_whitespace().collect();
                for i in 0..tokens.len().saturating_sub(n - 1) {
                    total += 1;
                    seen.insert(tokens[i..i + n].to_vec());
                }
            }
            let expected = seen.len() as f64 / total as f64;
            assert_eq!(distinct_n(&corpus, n).unwrap(), expected);
        }
    }

    #[test]
    fn synthesis_prompts_embed_the_seed_once_per_prompt() {
        let prompts = synthesis_prompts("tenacious").unwrap();
        assert_eq!(prompts.len(), 7);
        assert!(prompts[0].contains("beginning with 'Everyone says the person.'"));
        for prompt in &prompts {
            assert_eq!(prompt.matches("tenacious").count(), 1);
        }
        let other = synthesis_prompts("gentle").unwrap();
        for (a, b) in prompts.iter().zip(&other) {
            assert_eq!(a.replace("tenacious", "gentle"), *b);
        }
        assert!(synthesis_prompts("  ").is_err());
    }
}
