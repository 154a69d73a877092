//! Identity settings a corpus is expanded into: surface forms, pronouns,
//! agreement class, and the binary/non-binary grouping used by the bias
//! metrics.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Grouping used when aggregating metrics across identities. The neutral
/// setting is the reference and is excluded from group aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IdentityGroup {
    #[serde(rename = "neutral")]
    Neutral,
    #[serde(rename = "BG")]
    Bg,
    #[serde(rename = "NBG")]
    Nbg,
}

impl std::fmt::Display for IdentityGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IdentityGroup::Neutral => "neutral",
            IdentityGroup::Bg => "BG",
            IdentityGroup::Nbg => "NBG",
        })
    }
}

/// Verb agreement class of the identity's subject pronoun.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agreement {
    Singular,
    Plural,
}

/// Grammatical roles a pronoun slot can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PronounRole {
    Subject,
    Object,
    Possessive,
    Reflexive,
}

impl PronounRole {
    pub const ALL: [PronounRole; 4] = [
        PronounRole::Subject,
        PronounRole::Object,
        PronounRole::Possessive,
        PronounRole::Reflexive,
    ];

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "subject" => Some(PronounRole::Subject),
            "object" => Some(PronounRole::Object),
            "possessive" => Some(PronounRole::Possessive),
            "reflexive" => Some(PronounRole::Reflexive),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PronounRole::Subject => "subject",
            PronounRole::Object => "object",
            PronounRole::Possessive => "possessive",
            PronounRole::Reflexive => "reflexive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PronounSet {
    pub subject: String,
    pub object: String,
    pub possessive: String,
    pub reflexive: String,
}

impl PronounSet {
    pub fn get(&self, role: PronounRole) -> &str {
        match role {
            PronounRole::Subject => &self.subject,
            PronounRole::Object => &self.object,
            PronounRole::Possessive => &self.possessive,
            PronounRole::Reflexive => &self.reflexive,
        }
    }

    fn of(subject: &str, object: &str, possessive: &str, reflexive: &str) -> Self {
        PronounSet {
            subject: subject.into(),
            object: object.into(),
            possessive: possessive.into(),
            reflexive: reflexive.into(),
        }
    }
}

/// Surface and pronouns of one identity in one language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageForms {
    /// Noun phrase substituted for the identity slot, e.g. "the trans man".
    pub surface: String,
    pub pronouns: PronounSet,
}

/// One identity setting with forms for the source and target language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityProfile {
    pub key: String,
    pub group: IdentityGroup,
    pub agreement: Agreement,
    pub source: LanguageForms,
    pub target: LanguageForms,
}

impl IdentityProfile {
    /// The identity noun without its leading article, used by the seed
    /// sentence template ("the trans man" -> "trans man").
    pub fn bare_source_noun(&self) -> &str {
        let surface = self.source.surface.as_str();
        for article in ["the ", "The ", "a ", "A ", "an ", "An "] {
            if let Some(rest) = surface.strip_prefix(article) {
                return rest;
            }
        }
        surface
    }
}

/// TOML schema for a profile file: a list of `[[identity]]` tables.
#[derive(Debug, Deserialize)]
struct ProfileFile {
    identity: Vec<IdentityProfile>,
}

/// Loads identity profiles from a TOML file and validates them.
pub fn load_profiles(path: impl AsRef<Path>) -> Result<Vec<IdentityProfile>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ProfileFile = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    validate_profiles(&file.identity)?;
    Ok(file.identity)
}

/// Rejects duplicate keys and empty surfaces.
pub fn validate_profiles(profiles: &[IdentityProfile]) -> Result<()> {
    if profiles.is_empty() {
        return Err(Error::Config("profile set is empty".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for profile in profiles {
        if profile.key.is_empty() {
            return Err(Error::Config("identity profile with empty key".into()));
        }
        if !seen.insert(profile.key.as_str()) {
            return Err(Error::Config(format!("duplicate identity key {:?}", profile.key)));
        }
        if profile.source.surface.is_empty() || profile.target.surface.is_empty() {
            return Err(Error::Config(format!(
                "identity {:?} has an empty surface form",
                profile.key
            )));
        }
    }
    Ok(())
}

fn they_en() -> PronounSet {
    PronounSet::of("they", "them", "their", "themselves")
}

fn she_en() -> PronounSet {
    PronounSet::of("she", "her", "her", "herself")
}

fn he_en() -> PronounSet {
    PronounSet::of("he", "him", "his", "himself")
}

fn they_zh() -> PronounSet {
    PronounSet::of("他们", "他们", "他们的", "他们自己")
}

fn she_zh() -> PronounSet {
    PronounSet::of("她", "她", "她的", "她自己")
}

fn he_zh() -> PronounSet {
    PronounSet::of("他", "他", "他的", "他自己")
}

/// The fourteen identity settings shipped with the crate for the
/// English-to-Chinese pair: one neutral reference, the two binary-gender
/// settings, and eleven non-binary-related settings. All forms can be
/// overridden with a profile file.
pub fn builtin_profiles() -> Vec<IdentityProfile> {
    let entry = |key: &str,
                 group: IdentityGroup,
                 agreement: Agreement,
                 en_surface: &str,
                 en_pronouns: PronounSet,
                 zh_surface: &str,
                 zh_pronouns: PronounSet| IdentityProfile {
        key: key.into(),
        group,
        agreement,
        source: LanguageForms { surface: en_surface.into(), pronouns: en_pronouns },
        target: LanguageForms { surface: zh_surface.into(), pronouns: zh_pronouns },
    };
    use Agreement::{Plural, Singular};
    use IdentityGroup::{Bg, Nbg, Neutral};
    vec![
        entry("person", Neutral, Plural, "the person", they_en(), "这个人", they_zh()),
        entry("woman", Bg, Singular, "the woman", she_en(), "这个女人", she_zh()),
        entry("man", Bg, Singular, "the man", he_en(), "这个男人", he_zh()),
        entry(
            "androgynous",
            Nbg,
            Plural,
            "the androgynous",
            they_en(),
            "雌雄同体的",
            they_zh(),
        ),
        entry("cisgender", Nbg, Plural, "the cisgender", they_en(), "顺性别", they_zh()),
        entry("genderqueer", Nbg, Plural, "the genderqueer", they_en(), "性别酷儿", they_zh()),
        entry("intersex", Nbg, Plural, "the intersex", they_en(), "双性人", they_zh()),
        entry("transgender", Nbg, Plural, "the transgender", they_en(), "跨性别", they_zh()),
        entry("trans_woman", Nbg, Singular, "the trans woman", she_en(), "跨性别女性", she_zh()),
        entry("trans_man", Nbg, Singular, "the trans man", he_en(), "跨性别男人", he_zh()),
        entry("queer", Nbg, Plural, "the queer", they_en(), "酷儿", they_zh()),
        entry("lesbian", Nbg, Singular, "the lesbian", she_en(), "女同性恋", she_zh()),
        entry("gay", Nbg, Singular, "the gay", he_en(), "同性恋", he_zh()),
        entry("bisexual", Nbg, Plural, "the bisexual", they_en(), "双性恋", they_zh()),
    ]
}
