//! Grammar repair after pronoun substitution.
//!
//! Swapping a plural neutral pronoun for a singular one breaks agreement
//! ("he never give up"). A small rule pass fixes the common cases: copulas
//! and auxiliaries right after a singular subject pronoun at a clause start,
//! and the following main verb with adverbs in between. The rules are
//! deliberately best-effort; an external grammar-correction service
//! compatible with the LanguageTool check API can be layered on top and
//! failures there degrade to the rule output with a warning.

use std::time::Duration;

use crate::error::Error;
use crate::identity::{Agreement, IdentityProfile};
use crate::scorer::RequestOptions;
use crate::Result;

const ADVERBS: &[&str] = &[
    "never", "always", "often", "usually", "rarely", "seldom", "just", "really", "truly",
    "simply", "still", "also", "now", "sometimes", "frequently", "constantly", "generally",
    "typically", "occasionally", "definitely", "certainly", "probably", "quickly", "quietly",
    "barely", "hardly", "almost", "already", "even",
];

const CLAUSE_CONJUNCTIONS: &[&str] = &["and", "but", "or", "so", "yet"];

const MODALS: &[&str] = &[
    "can", "could", "may", "might", "must", "shall", "should", "will", "would", "ought",
    "cannot", "can't", "won't", "couldn't", "wouldn't", "shouldn't", "mustn't", "might've",
];

const PAST_FORMS: &[&str] = &[
    "was", "had", "did", "went", "gave", "took", "made", "got", "felt", "knew", "saw", "came",
    "found", "thought", "told", "became", "left", "kept", "began", "met", "ran", "said",
    "stood", "wore", "won", "wrote", "held", "heard", "lost", "paid", "sat", "sent", "spent",
    "spoke", "brought", "built", "bought", "grew", "drew", "fell", "flew", "forgot", "chose",
    "broke", "drove", "ate", "put", "cut", "hit", "hurt", "let", "set", "shut", "read",
];

fn irregular_third_singular(verb: &str) -> Option<&'static str> {
    match verb {
        "are" => Some("is"),
        "were" => Some("was"),
        "have" => Some("has"),
        "do" => Some("does"),
        "don't" => Some("doesn't"),
        "aren't" => Some("isn't"),
        "weren't" => Some("wasn't"),
        "haven't" => Some("hasn't"),
        _ => None,
    }
}

/// Third-person-singular form of a present-tense verb, or `None` when the
/// word should be left alone (modal, past form, or already inflected).
fn third_person_singular(verb: &str) -> Option<String> {
    if let Some(mapped) = irregular_third_singular(verb) {
        return Some(mapped.to_string());
    }
    if MODALS.contains(&verb) || PAST_FORMS.contains(&verb) {
        return None;
    }
    if verb.ends_with('s') || verb.ends_with("ed") || verb.len() < 2 {
        return None;
    }
    // Remaining contractions ("doesn't", "isn't") are already agreeing.
    if !verb.chars().all(|c| c.is_ascii_alphabetic()) {
        return None;
    }
    let inflected = if verb.ends_with("ch")
        || verb.ends_with("sh")
        || verb.ends_with('x')
        || verb.ends_with('z')
        || verb.ends_with('o')
    {
        format!("{verb}es")
    } else if let Some(stem) = verb.strip_suffix('y') {
        match stem.chars().last() {
            Some(c) if !"aeiou".contains(c) => format!("{stem}ies"),
            _ => format!("{verb}s"),
        }
    } else {
        format!("{verb}s")
    };
    Some(inflected)
}

/// Splits a word into its alphabetic-plus-apostrophe core and any trailing
/// punctuation.
fn split_trailing_punct(word: &str) -> (&str, &str) {
    let cut = word
        .char_indices()
        .rev()
        .take_while(|(_, c)| !c.is_alphanumeric() && *c != '\'')
        .map(|(i, _)| i)
        .last();
    match cut {
        Some(i) => (&word[..i], &word[i..]),
        None => (word, ""),
    }
}

fn ends_clause(word: &str) -> bool {
    word.ends_with(['.', '!', '?', ';'])
}

/// Rule pass: for singular-agreement profiles, re-inflect the verb that
/// follows the subject pronoun at a clause start, skipping adverbs.
/// Reflexive and possessive forms need no repair because every pronoun slot
/// already substitutes the role-correct form. The pass is idempotent.
pub fn apply_grammar_fixes(text: &str, profile: &IdentityProfile) -> String {
    if profile.agreement != Agreement::Singular {
        return text.to_string();
    }
    let subject = profile.source.pronouns.subject.to_lowercase();
    let mut out = String::with_capacity(text.len());
    let mut prev_word: Option<String> = None;
    let mut awaiting_verb = false;
    let mut rest = text;
    while !rest.is_empty() {
        let word_len =
            rest.find(char::is_whitespace).unwrap_or(rest.len());
        let (word, tail) = rest.split_at(word_len);
        let gap_len = tail
            .find(|c: char| !c.is_whitespace())
            .unwrap_or(tail.len());
        let (gap, next) = tail.split_at(gap_len);
        rest = next;
        if word.is_empty() {
            out.push_str(gap);
            continue;
        }

        let (core, punct) = split_trailing_punct(word);
        let lower = core.to_lowercase();
        let mut emitted = false;
        if awaiting_verb {
            if ADVERBS.contains(&lower.as_str()) {
                // keep skipping modifiers until the verb shows up
            } else {
                awaiting_verb = false;
                if let Some(fixed) = third_person_singular(&lower) {
                    let fixed = match core.chars().next() {
                        Some(first) if first.is_uppercase() => {
                            let mut c = fixed.chars();
                            match c.next() {
                                Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
                                None => fixed,
                            }
                        }
                        _ => fixed,
                    };
                    out.push_str(&fixed);
                    out.push_str(punct);
                    out.push_str(gap);
                    emitted = true;
                }
            }
        }
        if !emitted {
            out.push_str(word);
            out.push_str(gap);
        }

        let clause_start = match &prev_word {
            None => true,
            Some(prev) => {
                ends_clause(prev)
                    || CLAUSE_CONJUNCTIONS.contains(&split_trailing_punct(prev).0.to_lowercase().as_str())
            }
        };
        if clause_start && punct.is_empty() && lower == subject {
            awaiting_verb = true;
        }
        prev_word = Some(word.to_string());
    }
    out
}

/// One replacement proposed by the external service. Offsets and lengths
/// count Unicode scalar values, matching the LanguageTool check API for
/// basic-plane text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarEdit {
    pub offset: usize,
    pub length: usize,
    pub replacement: String,
}

/// Client for a LanguageTool-compatible `POST /v2/check` endpoint.
pub struct GrammarService {
    base_url: String,
    language: String,
    client: reqwest::blocking::Client,
    options: RequestOptions,
}

impl GrammarService {
    pub fn new(
        base_url: impl Into<String>,
        language: impl Into<String>,
        options: RequestOptions,
    ) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(options.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(GrammarService {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            language: language.into(),
            client,
            options,
        })
    }

    /// Asks the service for corrections; each match contributes its first
    /// replacement.
    pub fn check(&self, text: &str) -> Result<Vec<GrammarEdit>> {
        let url = format!("{}/v2/check", self.base_url);
        let attempts = self.options.retries + 1;
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            let result = self
                .client
                .post(&url)
                .form(&[("text", text), ("language", &self.language)])
                .send();
            match result {
                Ok(response) if response.status().is_success() => {
                    let body: serde_json::Value = response.json().map_err(|e| Error::Scoring {
                        attempts: attempt,
                        message: format!("invalid json from grammar service: {e}"),
                    })?;
                    let mut edits = Vec::new();
                    for entry in body.get("matches").and_then(|m| m.as_array()).unwrap_or(&vec![])
                    {
                        let (Some(offset), Some(length)) = (
                            entry.get("offset").and_then(|v| v.as_u64()),
                            entry.get("length").and_then(|v| v.as_u64()),
                        ) else {
                            continue;
                        };
                        let Some(replacement) = entry
                            .pointer("/replacements/0/value")
                            .and_then(|v| v.as_str())
                        else {
                            continue;
                        };
                        edits.push(GrammarEdit {
                            offset: offset as usize,
                            length: length as usize,
                            replacement: replacement.to_string(),
                        });
                    }
                    return Ok(edits);
                }
                Ok(response) => last_error = format!("http status {}", response.status()),
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(Error::Scoring { attempts, message: last_error })
    }
}

/// Applies service edits from the end of the text backwards so earlier
/// offsets stay valid; overlapping edits after the first are dropped.
pub fn apply_service_edits(text: &str, mut edits: Vec<GrammarEdit>) -> String {
    let chars: Vec<char> = text.chars().collect();
    edits.sort_by(|a, b| b.offset.cmp(&a.offset));
    let mut out: Vec<char> = chars.clone();
    let mut applied_from = usize::MAX;
    for edit in edits {
        let end = edit.offset + edit.length;
        if end > out.len() || end > applied_from {
            continue;
        }
        out.splice(edit.offset..end, edit.replacement.chars());
        applied_from = edit.offset;
    }
    out.into_iter().collect()
}

/// Rule pass plus optional service pass.
#[derive(Default)]
pub struct GrammarFixer {
    pub service: Option<GrammarService>,
}

impl GrammarFixer {
    pub fn rules_only() -> Self {
        GrammarFixer { service: None }
    }

    pub fn with_service(service: GrammarService) -> Self {
        GrammarFixer { service: Some(service) }
    }

    pub fn apply(&self, text: &str, profile: &IdentityProfile) -> String {
        let fixed = apply_grammar_fixes(text, profile);
        match &self.service {
            None => fixed,
            Some(service) => match service.check(&fixed) {
                Ok(edits) => apply_service_edits(&fixed, edits),
                Err(e) => {
                    log::warn!("grammar service unavailable, keeping rule output: {e}");
                    fixed
                }
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::builtin_profiles;
    use crate::testhttp::TestServer;

    fn profile(key: &str) -> IdentityProfile {
        builtin_profiles().into_iter().find(|p| p.key == key).unwrap()
    }

    #[test]
    fn inflects_verb_after_adverb() {
        let out = apply_grammar_fixes("He never give up.", &profile("man"));
        assert_eq!(out, "He never gives up.");
    }

    #[test]
    fn fixes_copula_after_singular_subject() {
        let out = apply_grammar_fixes("She are happy.", &profile("woman"));
        assert_eq!(out, "She is happy.");
    }

    #[test]
    fn plural_profiles_change_nothing() {
        let text = "They are a nice person.";
        assert_eq!(apply_grammar_fixes(text, &profile("person")), text);
    }

    #[test]
    fn second_clause_after_period_is_repaired() {
        let out = apply_grammar_fixes(
            "The man is tenacious. He never give up.",
            &profile("man"),
        );
        assert_eq!(out, "The man is tenacious. He never gives up.");
    }

    #[test]
    fn conjunction_starts_a_new_clause() {
        let out = apply_grammar_fixes("She smiles and she try again.", &profile("woman"));
        assert_eq!(out, "She smiles and she tries again.");
    }

    #[test]
    fn irregular_and_regular_inflections() {
        let man = profile("man");
        assert_eq!(apply_grammar_fixes("He have a plan.", &man), "He has a plan.");
        assert_eq!(apply_grammar_fixes("He always do it.", &man), "He always does it.");
        assert_eq!(apply_grammar_fixes("He don't quit.", &man), "He doesn't quit.");
        assert_eq!(apply_grammar_fixes("He go home.", &man), "He goes home.");
        assert_eq!(apply_grammar_fixes("He watch birds.", &man), "He watches birds.");
    }

    #[test]
    fn past_tense_and_modals_are_untouched() {
        let man = profile("man");
        assert_eq!(apply_grammar_fixes("He never gave up.", &man), "He never gave up.");
        assert_eq!(apply_grammar_fixes("He would win.", &man), "He would win.");
        assert_eq!(apply_grammar_fixes("He walked away.", &man), "He walked away.");
    }

    #[test]
    fn rule_pass_is_idempotent() {
        let man = profile("man");
        for text in [
            "He never give up.",
            "She are happy.",
            "He have a plan and he try hard. He watch birds.",
            "The man is tenacious. He never give up.",
            "He don't quit.",
            "He doesn't quit.",
        ] {
            let woman = profile("woman");
            for p in [&man, &woman] {
                let once = apply_grammar_fixes(text, p);
                let twice = apply_grammar_fixes(&once, p);
                assert_eq!(once, twice, "not idempotent for {text:?}");
            }
        }
    }

    #[test]
    fn preserves_spacing_and_punctuation() {
        let out = apply_grammar_fixes("  He  never   give up!  ", &profile("man"));
        assert_eq!(out, "  He  never   gives up!  ");
    }

    #[test]
    fn service_edits_apply_from_the_end() {
        let text = "He never give up";
        let edits = vec![GrammarEdit { offset: 9, length: 4, replacement: "gives".into() }];
        assert_eq!(apply_service_edits(text, edits), "He never gives up");
    }

    #[test]
    fn overlapping_service_edits_keep_the_first() {
        let text = "abcdef";
        let edits = vec![
            GrammarEdit { offset: 2, length: 3, replacement: "X".into() },
            GrammarEdit { offset: 0, length: 3, replacement: "Y".into() },
        ];
        // The edit at offset 2 applies; the one at 0 overlaps it and is dropped.
        assert_eq!(apply_service_edits(text, edits), "abXf");
    }

    #[test]
    fn fixer_uses_service_response() {
        let server = TestServer::start(|request| {
            assert!(request.path.ends_with("/v2/check"));
            serde_json::json!({
                "matches": [
                    {"offset": 4, "length": 5, "replacements": [{"value": "walks"}]}
                ]
            })
            .to_string()
        });
        let service = GrammarService::new(
            server.base_url.clone(),
            "en-US",
            RequestOptions { timeout_secs: 5, retries: 0, max_parallel: 1 },
        )
        .unwrap();
        let fixer = GrammarFixer::with_service(service);
        // No subject pronoun at a clause start, so the rule pass no-ops and
        // only the service rewrites "walkk".
        let out = fixer.apply("Him walkk home.", &profile("man"));
        assert_eq!(out, "Him walks home.");
    }

    #[test]
    fn fixer_degrades_to_rules_when_service_is_down() {
        let service = GrammarService::new(
            "http://127.0.0.1:9",
            "en-US",
            RequestOptions { timeout_secs: 1, retries: 0, max_parallel: 1 },
        )
        .unwrap();
        let fixer = GrammarFixer::with_service(service);
        let out = fixer.apply("He never give up.", &profile("man"));
        assert_eq!(out, "He never gives up.");
    }
}
