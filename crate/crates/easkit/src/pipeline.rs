//! The staged evaluation pipeline: expand, translate, score, report.
//!
//! Every stage reads the previous stage's files under the configured output
//! directory, so running the four stages separately and running
//! [`run_end_to_end`] produce identical bytes. Nothing in the outputs
//! depends on wall-clock time or iteration order of unordered maps.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::align::{
    train_statistical_aligner, AlignRoute, ExternalAligner, ExtractionMethod, ExtractionStatus,
    Lexicon, WordExtractor,
};
use crate::cache::FileCache;
use crate::config::{RunConfig, TranslatorConfig};
use crate::corpus::{expand_corpus, load_slotted_corpus, RealizedPair};
use crate::error::Error;
use crate::identity::{IdentityGroup, IdentityProfile};
use crate::metrics::{bleu, keyword_diff_sets, load_scores, strip_correct_identity};
use crate::parallel::map_bounded;
use crate::report::{
    aggregate_report, group_csv, identity_csv, render_json, render_text, scatter_csv, BiasReport,
    IdentityOutcome, ReportMetadata, ScatterRow,
};
use crate::scorer::{CachedScorer, LogprobScorer};
use crate::scoring::{classify_shift, eas, ShiftClass, ShiftRecord, ShiftStatus};
use crate::seedselect::{
    filter_ambiguous, load_candidate_words, pre_post_scan, scan_csv, score_candidates,
    ScanContext,
};
use crate::translate::translate_batch;
use crate::Result;

/// File layout under the output directory.
pub struct OutputLayout {
    root: PathBuf,
}

impl OutputLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        OutputLayout { root: root.into() }
    }

    pub fn realized(&self, identity: &str) -> PathBuf {
        self.root.join("realized").join(format!("{identity}.jsonl"))
    }

    pub fn hypotheses(&self, identity: &str) -> PathBuf {
        self.root.join("hypotheses").join(format!("{identity}.jsonl"))
    }

    pub fn shift(&self, identity: &str) -> PathBuf {
        self.root.join("shift").join(format!("{identity}.jsonl"))
    }

    pub fn expand_failures(&self) -> PathBuf {
        self.root.join("expand_failures.jsonl")
    }

    pub fn report_json(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn report_text(&self) -> PathBuf {
        self.root.join("report.txt")
    }

    pub fn identities_csv(&self) -> PathBuf {
        self.root.join("identities.csv")
    }

    pub fn groups_csv(&self) -> PathBuf {
        self.root.join("groups.csv")
    }

    pub fn scatter(&self) -> PathBuf {
        self.root.join("eas_scatter.csv")
    }

    pub fn seed_scores(&self) -> PathBuf {
        self.root.join("seed_scores.csv")
    }

    pub fn seed_words(&self) -> PathBuf {
        self.root.join("seed_words.txt")
    }

    pub fn seed_scan(&self) -> PathBuf {
        self.root.join("seed_scan.csv")
    }

    pub fn seed_scan_failures(&self) -> PathBuf {
        self.root.join("seed_scan_failures.jsonl")
    }
}

fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item)?;
        writer
            .write_all(line.as_bytes())
            .and_then(|_| writer.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut items = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: index + 1,
            message: format!("{}: {e}", path.display()),
        })?;
        items.push(item);
    }
    Ok(items)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpandSummary {
    pub identities: usize,
    pub pairs_per_identity: usize,
    pub failures: usize,
}

/// Realizes the slotted corpus for every identity profile and writes one
/// file per identity. A pair that fails for any identity is dropped from
/// all of them and recorded in the failures file.
pub fn run_expand(config: &RunConfig) -> Result<ExpandSummary> {
    let corpus = load_slotted_corpus(&config.corpus)?;
    let profiles = config.load_profiles()?;
    let fixer = config.build_grammar_fixer()?;
    let expansion = expand_corpus(&corpus, &profiles, &fixer)?;
    for failure in &expansion.failures {
        log::warn!(
            "could not realize {} for {}: {}",
            failure.id,
            failure.identity,
            failure.message
        );
    }
    let layout = OutputLayout::new(&config.out_dir);
    for (identity, pairs) in &expansion.settings {
        write_jsonl(&layout.realized(identity), pairs)?;
    }
    // Written even when empty so a rerun clears stale failures.
    write_jsonl(&layout.expand_failures(), &expansion.failures)?;
    Ok(ExpandSummary {
        identities: expansion.settings.len(),
        pairs_per_identity: expansion.settings.first().map(|(_, p)| p.len()).unwrap_or(0),
        failures: expansion.failures.len(),
    })
}

/// One translated sentence, as stored between the translate and score
/// stages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisLine {
    pub id: String,
    pub identity: String,
    pub source: String,
    pub hypothesis: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranslateSummary {
    pub identities: usize,
    pub sentences: usize,
}

fn open_cache(config: &RunConfig) -> Result<Option<Arc<FileCache>>> {
    match &config.cache {
        Some(path) => Ok(Some(Arc::new(FileCache::open(path)?))),
        None => Ok(None),
    }
}

/// Translates every realized sentence, one output file per identity. The
/// prompt cache, when configured, makes interrupted runs resumable.
pub fn run_translate(config: &RunConfig) -> Result<TranslateSummary> {
    let profiles = config.load_profiles()?;
    let engine = config.build_translator()?;
    let spec = config.prompt_spec()?;
    let languages = config.language_pair();
    let cache = open_cache(config)?;
    let layout = OutputLayout::new(&config.out_dir);
    let mut sentences = 0;
    for profile in &profiles {
        let pairs: Vec<RealizedPair> = read_jsonl(&layout.realized(&profile.key))?;
        let sources: Vec<String> = pairs.iter().map(|p| p.source.clone()).collect();
        let results = translate_batch(
            engine.as_ref(),
            &spec,
            &languages,
            &sources,
            cache.as_ref(),
            config.parallelism,
        );
        let mut lines = Vec::with_capacity(pairs.len());
        for (pair, result) in pairs.iter().zip(results) {
            let hypothesis = match result {
                Ok(hypothesis) => hypothesis,
                Err(e) => {
                    log::error!("translation failed for {} [{}]", pair.id, profile.key);
                    return Err(e);
                }
            };
            lines.push(HypothesisLine {
                id: pair.id.clone(),
                identity: profile.key.clone(),
                source: pair.source.clone(),
                hypothesis,
            });
        }
        sentences += lines.len();
        write_jsonl(&layout.hypotheses(&profile.key), &lines)?;
    }
    Ok(TranslateSummary { identities: profiles.len(), sentences })
}

/// One fully scored segment, as stored between the score and report stages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub id: String,
    pub identity: String,
    pub source: String,
    pub reference: String,
    pub hypothesis: String,
    /// Tracked attitude word in the source.
    pub word: String,
    /// Its translation in the hypothesis, when one was found.
    pub target_word: Option<String>,
    pub method: Option<ExtractionMethod>,
    pub e_src: f64,
    pub e_hypo: Option<f64>,
    pub status: ShiftStatus,
    pub shift: ShiftClass,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub identities: usize,
    pub records: usize,
    pub copy_failures: usize,
    pub alignment_failures: usize,
}

fn build_scorer(config: &RunConfig) -> Result<Box<dyn LogprobScorer>> {
    let scorer = config.build_scorer()?;
    Ok(match open_cache(config)? {
        Some(cache) => Box::new(CachedScorer::new(scorer, cache)),
        None => scorer,
    })
}

fn build_extractor(
    config: &RunConfig,
    training_pairs: Option<&[(Vec<String>, Vec<String>)]>,
) -> Result<WordExtractor> {
    let lexicon = match &config.aligner.lexicon {
        Some(path) => Some(Lexicon::load(path)?),
        None => None,
    };
    let route = if let Some(command) = &config.aligner.command {
        AlignRoute::External(ExternalAligner::new(command.clone())?)
    } else if let Some(pairs) = training_pairs {
        AlignRoute::Statistical(train_statistical_aligner(pairs, config.aligner.iterations)?)
    } else {
        AlignRoute::LexiconOnly
    };
    let mut extractor = WordExtractor::new(lexicon, route);
    extractor.probability_floor = config.aligner.probability_floor;
    Ok(extractor)
}

/// Scores attitude shift for every translated segment: finds the tracked
/// word's translation, scores both sides, and classifies the shift.
pub fn run_score(config: &RunConfig) -> Result<ScoreSummary> {
    let profiles = config.load_profiles()?;
    let layout = OutputLayout::new(&config.out_dir);
    let scorer = build_scorer(config)?;
    let source_templates = config.source_templates()?;
    let target_templates = config.target_templates()?;
    let source_tokenizer = crate::metrics::BleuTokenizer::WhitespacePunct;
    let target_tokenizer = config.target_tokenizer();
    let shift = config.shift_config()?;

    let mut data: Vec<(&IdentityProfile, Vec<RealizedPair>, Vec<HypothesisLine>)> = Vec::new();
    for profile in &profiles {
        let realized: Vec<RealizedPair> = read_jsonl(&layout.realized(&profile.key))?;
        let hypotheses: Vec<HypothesisLine> = read_jsonl(&layout.hypotheses(&profile.key))?;
        if realized.len() != hypotheses.len() {
            return Err(Error::Input(format!(
                "identity {}: {} realized sentences but {} hypotheses",
                profile.key,
                realized.len(),
                hypotheses.len()
            )));
        }
        for (pair, hyp) in realized.iter().zip(&hypotheses) {
            if pair.id != hyp.id {
                return Err(Error::Input(format!(
                    "identity {}: realized id {} does not match hypothesis id {}",
                    profile.key, pair.id, hyp.id
                )));
            }
        }
        data.push((profile, realized, hypotheses));
    }

    // The reference side of the realized corpus doubles as alignment
    // training data when no external aligner is configured.
    let training: Vec<(Vec<String>, Vec<String>)> = data
        .iter()
        .flat_map(|(_, realized, _)| realized.iter())
        .map(|pair| {
            (source_tokenizer.tokenize(&pair.source), target_tokenizer.tokenize(&pair.target))
        })
        .collect();
    let extractor = build_extractor(config, Some(&training))?;

    let mut summary = ScoreSummary {
        identities: profiles.len(),
        records: 0,
        copy_failures: 0,
        alignment_failures: 0,
    };
    for (profile, realized, hypotheses) in &data {
        let cells: Vec<(&RealizedPair, &HypothesisLine)> =
            realized.iter().zip(hypotheses.iter()).collect();
        let results = map_bounded(&cells, config.parallelism, |_, (pair, hyp)| {
            let word = pair.tracked_word().to_string();
            let source_tokens = source_tokenizer.tokenize(&pair.source);
            let tracked_index =
                source_tokens.iter().position(|t| t == &word).ok_or_else(|| {
                    Error::Realization(format!(
                        "tracked word {word:?} is not a source token of {}",
                        pair.id
                    ))
                })?;
            let hypothesis_tokens = target_tokenizer.tokenize(&hyp.hypothesis);
            let extraction =
                extractor.extract_target_word(&source_tokens, tracked_index, &hypothesis_tokens)?;
            let e_src = eas(scorer.as_ref(), &source_templates, &word)?;
            let e_hypo = match &extraction.target_word {
                Some(target_word) => {
                    Some(eas(scorer.as_ref(), &target_templates, target_word)?)
                }
                None => None,
            };
            let status = match extraction.status {
                ExtractionStatus::Ok => ShiftStatus::Scored,
                ExtractionStatus::CopyFailure => ShiftStatus::CopyFailure,
                ExtractionStatus::NoAlignment => ShiftStatus::AlignmentFailure,
            };
            let record = ShiftRecord { e_src, e_hypo, status };
            record.validate()?;
            let class = classify_shift(&record, &shift);
            Ok(TranslationRecord {
                id: pair.id.clone(),
                identity: profile.key.clone(),
                source: pair.source.clone(),
                reference: pair.target.clone(),
                hypothesis: hyp.hypothesis.clone(),
                word,
                target_word: extraction.target_word,
                method: extraction.method,
                e_src,
                e_hypo,
                status,
                shift: class,
            })
        });
        let records: Vec<TranslationRecord> = results.into_iter().collect::<Result<Vec<_>>>()?;
        summary.records += records.len();
        summary.copy_failures +=
            records.iter().filter(|r| r.status == ShiftStatus::CopyFailure).count();
        summary.alignment_failures +=
            records.iter().filter(|r| r.status == ShiftStatus::AlignmentFailure).count();
        write_jsonl(&layout.shift(&profile.key), &records)?;
    }
    Ok(summary)
}

/// Aggregates the scored records into the bias report and writes every
/// rendering of it.
pub fn run_report(config: &RunConfig) -> Result<BiasReport> {
    let profiles = config.load_profiles()?;
    let layout = OutputLayout::new(&config.out_dir);
    let bleu_tokenizer = config.bleu_tokenizer();
    let external_scores = match &config.scores {
        Some(path) => Some(load_scores(path)?),
        None => None,
    };
    let stopwords = config.load_stopwords()?;

    let mut outcomes = Vec::new();
    let mut scatter_rows = Vec::new();
    let mut outputs: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for profile in &profiles {
        let records: Vec<TranslationRecord> = read_jsonl(&layout.shift(&profile.key))?;
        let mut hypotheses = Vec::with_capacity(records.len());
        let mut references = Vec::with_capacity(records.len());
        for record in &records {
            let (hyp, reference) = strip_correct_identity(
                &record.hypothesis,
                &record.reference,
                &profile.target.surface,
            );
            hypotheses.push(hyp);
            references.push(reference);
        }
        let bleu_score = bleu(&hypotheses, &references, bleu_tokenizer)?;
        let mut segment_metrics = BTreeMap::new();
        if let Some(table) = &external_scores {
            for metric in table.metrics() {
                let values = table.values_for(&profile.key, &metric);
                if !values.is_empty() {
                    segment_metrics.insert(metric, values);
                }
            }
        }
        outputs.insert(
            profile.key.clone(),
            records.iter().map(|r| r.hypothesis.clone()).collect(),
        );
        scatter_rows.extend(records.iter().map(|r| ScatterRow {
            segment_id: r.id.clone(),
            identity: r.identity.clone(),
            e_src: r.e_src,
            e_hypo: r.e_hypo,
            status: r.status,
        }));
        outcomes.push(IdentityOutcome {
            identity: profile.key.clone(),
            group: profile.group,
            records: records
                .iter()
                .map(|r| ShiftRecord { e_src: r.e_src, e_hypo: r.e_hypo, status: r.status })
                .collect(),
            segment_metrics,
            corpus_metrics: BTreeMap::from([("bleu".to_string(), bleu_score)]),
        });
    }

    let neutral = profiles
        .iter()
        .find(|p| p.group == IdentityGroup::Neutral)
        .map(|p| p.key.clone());
    let keyword_sets =
        keyword_diff_sets(&outputs, neutral.as_deref(), &stopwords, bleu_tokenizer);

    let mut metadata = ReportMetadata::new(
        config.scorer.describe(),
        config.translator.describe(),
        config.delta,
    );
    let band = config.ambiguity_band()?;
    metadata.extras.insert("ambiguity_band".into(), format!("[{}, {}]", band.lower, band.upper));
    let spec = config.prompt_spec()?;
    metadata
        .extras
        .insert("moral_context".into(), if spec.moral_context.is_some() { "on" } else { "off" }.into());
    metadata
        .extras
        .insert("lexical_block".into(), if spec.lexical_pairs.is_some() { "on" } else { "off" }.into());
    if let TranslatorConfig::Chat { .. } = &config.translator {
        let decoding = config.translator.decoding();
        metadata.extras.insert("beam_size".into(), decoding.beam_size.to_string());
        metadata.extras.insert("max_new_tokens".into(), decoding.max_new_tokens.to_string());
    }
    metadata.extras.insert(
        "aligner".into(),
        match &config.aligner.command {
            Some(command) => format!("external:{}", command.join(" ")),
            None => format!(
                "statistical:iterations={},floor={}",
                config.aligner.iterations, config.aligner.probability_floor
            ),
        },
    );
    let languages = config.language_pair();
    metadata
        .extras
        .insert("languages".into(), format!("{}->{}", languages.source.code, languages.target.code));

    let report = aggregate_report(&outcomes, &config.shift_config()?, keyword_sets, metadata)?;
    write_text(&layout.report_json(), &render_json(&report)?)?;
    write_text(&layout.report_text(), &render_text(&report))?;
    write_text(&layout.identities_csv(), &identity_csv(&report)?)?;
    write_text(&layout.groups_csv(), &group_csv(&report)?)?;
    write_text(&layout.scatter(), &scatter_csv(&scatter_rows)?)?;
    Ok(report)
}

/// All four stages in order, returning the final report.
pub fn run_end_to_end(config: &RunConfig) -> Result<BiasReport> {
    run_expand(config)?;
    run_translate(config)?;
    run_score(config)?;
    run_report(config)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedsSummary {
    pub candidates: usize,
    pub selected: usize,
    pub scan_failures: Option<usize>,
}

/// Scores the candidate word list, keeps the ambiguous band, and writes the
/// selection. With `scan`, also translates each selected word in every
/// configured identity context and scores the translations.
pub fn run_seeds(config: &RunConfig, scan: bool) -> Result<SeedsSummary> {
    let words_path = config
        .seeds
        .words
        .as_ref()
        .ok_or_else(|| Error::Config("seeds.words is not configured".into()))?;
    let words = load_candidate_words(words_path)?;
    let scorer = build_scorer(config)?;
    let source_templates = config.source_templates()?;
    let scored = score_candidates(scorer.as_ref(), &source_templates, &words, config.parallelism)?;
    let band = config.ambiguity_band()?;
    let selected = filter_ambiguous(&scored, &band);

    let layout = OutputLayout::new(&config.out_dir);
    let mut csv_text = String::from("word,e_source,selected\n");
    for word in &scored {
        csv_text.push_str(&format!(
            "{},{},{}\n",
            word.word,
            word.e_source,
            band.contains(word.e_source)
        ));
    }
    write_text(&layout.seed_scores(), &csv_text)?;
    let mut selected_text = String::new();
    for word in &selected {
        selected_text.push_str(&word.word);
        selected_text.push('\n');
    }
    write_text(&layout.seed_words(), &selected_text)?;

    let mut scan_failures = None;
    if scan {
        let engine = config.build_translator()?;
        let target_templates = config.target_templates()?;
        let prompt = config.prompt_spec()?;
        let languages = config.language_pair();
        // No parallel corpus exists at seed time, so extraction leans on
        // the lexicon or an external aligner.
        let extractor = build_extractor(config, None)?;
        let profiles = config.seed_profiles()?;
        let context = ScanContext {
            scorer: scorer.as_ref(),
            source_templates: &source_templates,
            target_templates: &target_templates,
            engine: engine.as_ref(),
            prompt: &prompt,
            languages: &languages,
            extractor: &extractor,
            target_tokenizer: config.target_tokenizer(),
            profiles: &profiles,
            parallelism: config.parallelism,
        };
        let outcome = pre_post_scan(&selected, &context);
        write_text(&layout.seed_scan(), &scan_csv(&outcome)?)?;
        write_jsonl(&layout.seed_scan_failures(), &outcome.failures)?;
        scan_failures = Some(outcome.failures.len());
    }
    Ok(SeedsSummary { candidates: scored.len(), selected: selected.len(), scan_failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Origin, SlottedSentencePair};
    use crate::grammar::GrammarFixer;
    use crate::identity::builtin_profiles;
    use crate::scorer::FixtureScorer;
    use crate::templates::{render_judgment_prompts, split_judgment, AttitudeTemplatePair};
    use crate::translate::{LanguagePair, PromptSpec};
    use std::collections::HashMap;

    fn slotted(id: &str, src: &str, tgt: &str, word: &str) -> SlottedSentencePair {
        let at = src.find(word).unwrap();
        SlottedSentencePair {
            id: id.to_string(),
            src: src.to_string(),
            tgt: tgt.to_string(),
            word: word.to_string(),
            word_span: (at, at + word.len()),
            origin: Origin::Authentic,
        }
    }

    fn score_entries(
        entries: &mut HashMap<String, serde_json::Value>,
        templates: &AttitudeTemplatePair,
        word: &str,
        positive: f64,
        negative: f64,
    ) {
        let rendered = render_judgment_prompts(templates, word).unwrap();
        let (prefix, token) =
            split_judgment(&rendered.positive, &rendered.judgment_token).unwrap();
        entries.insert(FixtureScorer::key(prefix, token), serde_json::json!(positive));
        let (prefix, token) =
            split_judgment(&rendered.negative, &rendered.judgment_token).unwrap();
        entries.insert(FixtureScorer::key(prefix, token), serde_json::json!(negative));
    }

    /// Builds a complete fixture world in `dir` and returns the config.
    fn fixture_world(dir: &Path) -> RunConfig {
        let corpus = vec![
            slotted(
                "p1",
                "[IDENTITY] is tenacious. [PRON:subject] never give up.",
                "[IDENTITY]很固执。[PRON:subject]从不放弃。",
                "tenacious",
            ),
            slotted(
                "p2",
                "Everyone says [IDENTITY] is stubborn today.",
                "大家都说[IDENTITY]今天很顽固。",
                "stubborn",
            ),
        ];
        let corpus_text: String = corpus
            .iter()
            .map(|p| serde_json::to_string(p).unwrap() + "\n")
            .collect();
        std::fs::write(dir.join("corpus.jsonl"), corpus_text).unwrap();

        std::fs::write(dir.join("lexicon.tsv"), "tenacious\t固执\nstubborn\t顽固\n").unwrap();

        // Attitude scores: both words lean positive in English; the
        // tenacious translation flips negative, the stubborn one stays put.
        let english = AttitudeTemplatePair::english();
        let chinese = AttitudeTemplatePair::chinese();
        let mut scores = HashMap::new();
        score_entries(&mut scores, &english, "tenacious", -1.0, -1.5);
        score_entries(&mut scores, &english, "stubborn", -1.0, -1.5);
        score_entries(&mut scores, &chinese, "固执", -2.0, -1.5);
        score_entries(&mut scores, &chinese, "顽固", -1.6, -1.5);
        std::fs::write(
            dir.join("scores.json"),
            serde_json::to_string_pretty(&scores).unwrap(),
        )
        .unwrap();

        // Translations echo the reference for every realized source.
        let profiles = builtin_profiles();
        let expansion =
            expand_corpus(&corpus, &profiles, &GrammarFixer::rules_only()).unwrap();
        let spec = PromptSpec::constrained();
        let languages = LanguagePair::default();
        let mut translations = HashMap::new();
        for (_, pairs) in &expansion.settings {
            for pair in pairs {
                let prompt = spec.build_prompt(&pair.source, &languages).unwrap();
                translations.insert(prompt, pair.target.clone());
            }
        }
        std::fs::write(
            dir.join("translations.json"),
            serde_json::to_string_pretty(&translations).unwrap(),
        )
        .unwrap();

        let config_text = "corpus = \"corpus.jsonl\"\nout_dir = \"out\"\ncache = \"cache.jsonl\"\n\
             [scorer]\nkind = \"fixture\"\nmodel = \"m\"\npath = \"scores.json\"\n\
             [translator]\nkind = \"fixture\"\nname = \"t\"\npath = \"translations.json\"\n\
             [aligner]\nlexicon = \"lexicon.tsv\"\n";
        std::fs::write(dir.join("run.toml"), config_text).unwrap();
        RunConfig::load(dir.join("run.toml")).unwrap()
    }

    #[test]
    fn end_to_end_run_produces_a_stable_report() {
        let dir = tempfile::tempdir().unwrap();
        let config = fixture_world(dir.path());
        let report = run_end_to_end(&config).unwrap();

        assert_eq!(report.identities.len(), 14);
        for identity in &report.identities {
            assert_eq!(identity.n, 2);
            assert_eq!(identity.scored, 2);
            // tenacious flips to negative (0.5 -> -0.5), stubborn stays
            // (0.5 -> -0.1): one flip out of two records.
            assert_eq!(identity.rates.r_tn, 50.0);
            assert_eq!(identity.rates.r_tp, 0.0);
            let eas = identity.corpus_eas.unwrap();
            assert!((eas - (-0.3)).abs() < 1e-12, "corpus eas {eas}");
            // Hypotheses equal references, so quality is perfect.
            assert!((identity.corpus_metrics["bleu"] - 100.0).abs() < 1e-9);
        }
        // Identical behavior in both groups cancels out.
        assert_eq!(report.shift_bias_rate, 0.0);
        let keys: Vec<&String> = report.keyword_sets.keys().collect();
        for i in 0..keys.len() {
            for j in i + 1..keys.len() {
                assert!(report.keyword_sets[keys[i]]
                    .is_disjoint(&report.keyword_sets[keys[j]]));
            }
        }

        // A rerun with a warm cache writes identical bytes.
        let layout = OutputLayout::new(&config.out_dir);
        let first = std::fs::read(layout.report_json()).unwrap();
        run_end_to_end(&config).unwrap();
        let second = std::fs::read(layout.report_json()).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn staged_stages_match_the_single_run() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = fixture_world(dir.path());
        run_end_to_end(&config).unwrap();
        let single = std::fs::read(OutputLayout::new(&config.out_dir).report_json()).unwrap();

        config.out_dir = dir.path().join("out_staged");
        let expand = run_expand(&config).unwrap();
        assert_eq!(expand.identities, 14);
        assert_eq!(expand.pairs_per_identity, 2);
        assert_eq!(expand.failures, 0);
        let translate = run_translate(&config).unwrap();
        assert_eq!(translate.sentences, 28);
        let score = run_score(&config).unwrap();
        assert_eq!(score.records, 28);
        assert_eq!(score.copy_failures, 0);
        assert_eq!(score.alignment_failures, 0);
        run_report(&config).unwrap();
        let staged = std::fs::read(OutputLayout::new(&config.out_dir).report_json()).unwrap();
        assert_eq!(single, staged);
    }

    #[test]
    fn seed_selection_writes_scores_and_selection() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = fixture_world(dir.path());
        std::fs::write(dir.path().join("words.txt"), "tenacious\nstubborn\n").unwrap();
        config.seeds.words = Some(dir.path().join("words.txt"));
        // tenacious scores 0.5 (inside the band), stubborn 0.5 as well; a
        // tighter band splits them apart only by configuration.
        let summary = run_seeds(&config, false).unwrap();
        assert_eq!(summary.candidates, 2);
        assert_eq!(summary.selected, 2);
        let layout = OutputLayout::new(&config.out_dir);
        let scores_text = std::fs::read_to_string(layout.seed_scores()).unwrap();
        assert!(scores_text.starts_with("word,e_source,selected\n"));
        assert!(scores_text.contains("tenacious,0.5,true"));
        let words_text = std::fs::read_to_string(layout.seed_words()).unwrap();
        assert_eq!(words_text, "tenacious\nstubborn\n");
    }
}
