//! Fixture world and verdict helpers shared by the CLI test suites.

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

use easkit::corpus::{expand_corpus, Origin, SlottedSentencePair};
use easkit::grammar::GrammarFixer;
use easkit::identity::{builtin_profiles, IdentityGroup};
use easkit::scorer::FixtureScorer;
use easkit::templates::{render_judgment_prompts, split_judgment, AttitudeTemplatePair};
use easkit::translate::{LanguagePair, PromptSpec};

/// Runs one acceptance criterion and prints its verdict line. A failing body
/// still fails the test; the line just makes the outcome greppable.
pub fn criterion<F: FnOnce()>(number: usize, name: &str, body: F) {
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(body));
    match outcome {
        Ok(()) => println!("criterion {number:02}: pass - {name}"),
        Err(panic) => {
            println!("criterion {number:02}: FAIL - {name}");
            std::panic::resume_unwind(panic);
        }
    }
}

pub fn easkit_bin() -> &'static str {
    env!("CARGO_BIN_EXE_easkit")
}

pub fn run_cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(easkit_bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("the easkit binary should launch")
}

pub fn assert_cli_ok(output: &Output) {
    assert!(
        output.status.success(),
        "command exited with {:?}\nstdout:\n{}\nstderr:\n{}",
        output.status.code(),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

pub fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

pub fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

pub fn slotted(id: &str, src: &str, tgt: &str, word: &str) -> SlottedSentencePair {
    let at = src.find(word).expect("tracked word must occur in src");
    SlottedSentencePair {
        id: id.to_string(),
        src: src.to_string(),
        tgt: tgt.to_string(),
        word: word.to_string(),
        word_span: (at, at + word.len()),
        origin: Origin::Authentic,
    }
}

/// Adds the two fixture entries that make `word` score `positive - negative`.
pub fn score_entries(
    entries: &mut HashMap<String, f64>,
    templates: &AttitudeTemplatePair,
    word: &str,
    positive: f64,
    negative: f64,
) {
    let rendered = render_judgment_prompts(templates, word).unwrap();
    let (prefix, token) = split_judgment(&rendered.positive, &rendered.judgment_token).unwrap();
    entries.insert(FixtureScorer::key(prefix, token), positive);
    let (prefix, token) = split_judgment(&rendered.negative, &rendered.judgment_token).unwrap();
    entries.insert(FixtureScorer::key(prefix, token), negative);
}

/// Two-character rendering standing in for the faithful translation of
/// `w{k}`. The codepoints stay below any character used by the built-in
/// identity surfaces, so lexicon lookups cannot collide.
pub fn positive_rendering(k: usize) -> String {
    let base = 0x4E00 + 2 * k as u32;
    [base, base + 1].iter().map(|&c| char::from_u32(c).unwrap()).collect()
}

/// Two-character rendering standing in for an attitude-flipped translation
/// of `w{k}`.
pub fn negative_rendering(k: usize) -> String {
    let base = 0x6E00 + 2 * k as u32;
    [base, base + 1].iter().map(|&c| char::from_u32(c).unwrap()).collect()
}

/// Writes a complete evaluation world under `dir`: a slotted corpus of
/// `n_pairs` sentences, fixture scores and translations, a bilingual
/// lexicon, per-segment quality scores and two run configurations
/// (`run.toml` with the default constrained prompt, `run_plain.toml` with
/// both prompt blocks switched off).
///
/// Every source word scores +0.5; its faithful rendering also scores +0.5
/// and its flipped rendering -0.5. Translations for non-binary-related
/// identities flip every even-numbered word, so with the default dead zone
/// each of those identities flips exactly half its corpus to negative while
/// the binary and neutral settings stay stable.
pub fn write_world(dir: &Path, n_pairs: usize) {
    let corpus: Vec<SlottedSentencePair> = (0..n_pairs)
        .map(|k| {
            slotted(
                &format!("p{k}"),
                &format!("[IDENTITY] is w{k} today."),
                &format!("[IDENTITY]今天很{}。", positive_rendering(k)),
                &format!("w{k}"),
            )
        })
        .collect();
    let corpus_text: String =
        corpus.iter().map(|p| serde_json::to_string(p).unwrap() + "\n").collect();
    std::fs::write(dir.join("corpus.jsonl"), corpus_text).unwrap();

    let mut lexicon = String::new();
    for k in 0..n_pairs {
        lexicon.push_str(&format!("w{k}\t{}\n", positive_rendering(k)));
        lexicon.push_str(&format!("w{k}\t{}\n", negative_rendering(k)));
    }
    std::fs::write(dir.join("lexicon.tsv"), lexicon).unwrap();

    let english = AttitudeTemplatePair::english();
    let chinese = AttitudeTemplatePair::chinese();
    let mut scores = HashMap::new();
    for k in 0..n_pairs {
        score_entries(&mut scores, &english, &format!("w{k}"), -1.0, -1.5);
        score_entries(&mut scores, &chinese, &positive_rendering(k), -1.0, -1.5);
        score_entries(&mut scores, &chinese, &negative_rendering(k), -2.0, -1.5);
    }
    std::fs::write(dir.join("scores.json"), serde_json::to_string_pretty(&scores).unwrap())
        .unwrap();

    let profiles = builtin_profiles();
    let expansion = expand_corpus(&corpus, &profiles, &GrammarFixer::rules_only()).unwrap();
    let spec = PromptSpec::constrained();
    let languages = LanguagePair::default();
    let mut translations = HashMap::new();
    for (identity, pairs) in &expansion.settings {
        let group = profiles.iter().find(|p| &p.key == identity).unwrap().group;
        for pair in pairs {
            let k: usize = pair.id[1..].parse().unwrap();
            let prompt = spec.build_prompt(&pair.source, &languages).unwrap();
            let hypothesis = if group == IdentityGroup::Nbg && k % 2 == 0 {
                pair.target.replace(&positive_rendering(k), &negative_rendering(k))
            } else {
                pair.target.clone()
            };
            translations.insert(prompt, hypothesis);
        }
    }
    std::fs::write(
        dir.join("translations.json"),
        serde_json::to_string_pretty(&translations).unwrap(),
    )
    .unwrap();

    let mut quality = String::from("segment_id,identity,metric,value\n");
    for profile in &profiles {
        for k in 0..n_pairs {
            quality.push_str(&format!("p{k},{},comet,{}\n", profile.key, 0.5 + 0.01 * k as f64));
        }
    }
    std::fs::write(dir.join("scores.csv"), quality).unwrap();

    let base = "corpus = \"corpus.jsonl\"\n\
                out_dir = \"out\"\n\
                cache = \"cache.jsonl\"\n\
                scores = \"scores.csv\"\n\n\
                [scorer]\nkind = \"fixture\"\nmodel = \"attitude-fixture\"\npath = \"scores.json\"\n\n\
                [translator]\nkind = \"fixture\"\nname = \"mt-fixture\"\npath = \"translations.json\"\n\n\
                [aligner]\nlexicon = \"lexicon.tsv\"\n";
    std::fs::write(dir.join("run.toml"), base).unwrap();
    std::fs::write(
        dir.join("run_plain.toml"),
        format!("{base}\n[prompt]\nmoral_context = false\nlexical_block = false\n"),
    )
    .unwrap();
}

/// Writes a candidate-word world for the seed subcommand: 703 words whose
/// fixture scores put exactly 384 of them inside the default ambiguity
/// band. Word `i` is in the band exactly when `(i * 7) % 703 < 384`; since 7
/// and 703 are coprime that picks 384 words spread over the whole list.
pub fn write_seed_world(dir: &Path) {
    let english = AttitudeTemplatePair::english();
    let mut words = String::new();
    let mut scores = HashMap::new();
    for i in 0..703usize {
        let word = format!("word{i}");
        words.push_str(&word);
        words.push('\n');
        if seed_word_in_band(i) {
            score_entries(&mut scores, &english, &word, -1.0, -1.0);
        } else {
            score_entries(&mut scores, &english, &word, -1.0, -6.0);
        }
    }
    std::fs::write(dir.join("words.txt"), words).unwrap();
    std::fs::write(dir.join("scores.json"), serde_json::to_string_pretty(&scores).unwrap())
        .unwrap();
    std::fs::write(dir.join("corpus.jsonl"), "").unwrap();
    std::fs::write(dir.join("translations.json"), "{}").unwrap();

    let config = "corpus = \"corpus.jsonl\"\n\
                  out_dir = \"out\"\n\n\
                  [scorer]\nkind = \"fixture\"\nmodel = \"attitude-fixture\"\npath = \"scores.json\"\n\n\
                  [translator]\nkind = \"fixture\"\nname = \"mt-fixture\"\npath = \"translations.json\"\n\n\
                  [seeds]\nwords = \"words.txt\"\n";
    std::fs::write(dir.join("run.toml"), config).unwrap();
}

pub fn seed_word_in_band(i: usize) -> bool {
    (i * 7) % 703 < 384
}
