//! Aggregation of per-identity shift records and quality scores into one
//! bias report, plus deterministic renderers (JSON, text, CSV).
//!
//! Reports carry no timestamps and all maps are ordered, so the same inputs
//! render to identical bytes. Sample sums are computed in sorted order,
//! which makes the aggregate invariant under input permutation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::identity::IdentityGroup;
use crate::scoring::{
    corpus_eas, shift_bias_rate, shift_rates, GroupRates, ShiftConfig, ShiftRates, ShiftRecord,
    ShiftStatus, SHIFT_DENOMINATOR_POLICY,
};
use crate::Result;

/// Recorded in report metadata: which records enter a per-identity corpus
/// attitude score.
pub const EAS_DENOMINATOR_POLICY: &str = "scored records only";

/// Recorded in report metadata: how spread is measured.
pub const SPREAD_POLICY: &str = "population standard deviation";

fn ordered_sum(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum()
}

/// Sample mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> Result<MeanStd> {
    if values.is_empty() {
        return Err(Error::UndefinedMetric("mean of an empty sample".into()));
    }
    let n = values.len() as f64;
    let mean = ordered_sum(values) / n;
    let squared: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let std = (ordered_sum(&squared) / n).sqrt();
    Ok(MeanStd { mean, std })
}

/// Everything measured for one identity setting, before aggregation.
#[derive(Debug, Clone)]
pub struct IdentityOutcome {
    pub identity: String,
    pub group: IdentityGroup,
    pub records: Vec<ShiftRecord>,
    /// Per-segment quality scores keyed by metric name.
    pub segment_metrics: BTreeMap<String, Vec<f64>>,
    /// Corpus-level scores keyed by metric name.
    pub corpus_metrics: BTreeMap<String, f64>,
}

/// Aggregated view of one identity setting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity: String,
    pub group: IdentityGroup,
    pub n: usize,
    pub scored: usize,
    pub copy_failures: usize,
    pub alignment_failures: usize,
    /// Mean attitude score of the translations, over scored records only.
    pub corpus_eas: Option<f64>,
    pub rates: ShiftRates,
    pub metrics: BTreeMap<String, MeanStd>,
    pub corpus_metrics: BTreeMap<String, f64>,
}

/// Aggregated view of one identity group, over the pooled records of its
/// identities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupReport {
    pub group: IdentityGroup,
    pub identities: Vec<String>,
    pub n: usize,
    pub corpus_eas: Option<f64>,
    pub rates: ShiftRates,
}

/// Provenance and policy notes embedded in every report. Deliberately free
/// of timestamps so reruns are byte-identical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub scorer: String,
    pub translator: String,
    pub delta: f64,
    pub shift_denominator: String,
    pub identity_eas_denominator: String,
    pub spread: String,
    /// Free-form extra settings worth reproducing, ordered by key.
    pub extras: BTreeMap<String, String>,
}

impl ReportMetadata {
    pub fn new(scorer: impl Into<String>, translator: impl Into<String>, delta: f64) -> Self {
        ReportMetadata {
            scorer: scorer.into(),
            translator: translator.into(),
            delta,
            shift_denominator: SHIFT_DENOMINATOR_POLICY.to_string(),
            identity_eas_denominator: EAS_DENOMINATOR_POLICY.to_string(),
            spread: SPREAD_POLICY.to_string(),
            extras: BTreeMap::new(),
        }
    }
}

/// The full bias report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasReport {
    pub metadata: ReportMetadata,
    pub identities: Vec<IdentityReport>,
    pub groups: Vec<GroupReport>,
    /// Positive values mean the non-binary group fares worse.
    pub shift_bias_rate: f64,
    /// Spread of each metric's per-identity value across identities.
    pub cross_identity: BTreeMap<String, MeanStd>,
    pub keyword_sets: BTreeMap<String, BTreeSet<String>>,
}

fn group_rank(group: IdentityGroup) -> u8 {
    match group {
        IdentityGroup::Neutral => 0,
        IdentityGroup::Bg => 1,
        IdentityGroup::Nbg => 2,
    }
}

fn scored_scores(records: &[ShiftRecord]) -> Vec<f64> {
    records.iter().filter_map(|r| r.e_hypo).collect()
}

/// Builds the bias report. Every identity must report the same metric
/// names; gaps are an aggregation error listing the missing
/// `identity:metric` pairs. The binary and non-binary groups must both be
/// present, otherwise the headline rate is undefined.
pub fn aggregate_report(
    outcomes: &[IdentityOutcome],
    shift: &ShiftConfig,
    keyword_sets: BTreeMap<String, BTreeSet<String>>,
    metadata: ReportMetadata,
) -> Result<BiasReport> {
    if outcomes.is_empty() {
        return Err(Error::Input("no identity outcomes to aggregate".into()));
    }
    let mut seen = BTreeSet::new();
    for outcome in outcomes {
        if !seen.insert(outcome.identity.as_str()) {
            return Err(Error::Input(format!("duplicate identity {}", outcome.identity)));
        }
    }

    let mut segment_metric_names = BTreeSet::new();
    let mut corpus_metric_names = BTreeSet::new();
    for outcome in outcomes {
        segment_metric_names.extend(outcome.segment_metrics.keys().cloned());
        corpus_metric_names.extend(outcome.corpus_metrics.keys().cloned());
    }
    let mut missing = Vec::new();
    for outcome in outcomes {
        for name in &segment_metric_names {
            if !outcome.segment_metrics.contains_key(name) {
                missing.push(format!("{}:{}", outcome.identity, name));
            }
        }
        for name in &corpus_metric_names {
            if !outcome.corpus_metrics.contains_key(name) {
                missing.push(format!("{}:{}", outcome.identity, name));
            }
        }
    }
    if !missing.is_empty() {
        missing.sort();
        return Err(Error::Aggregation { missing });
    }

    let mut ordered: Vec<&IdentityOutcome> = outcomes.iter().collect();
    ordered.sort_by(|a, b| {
        group_rank(a.group).cmp(&group_rank(b.group)).then(a.identity.cmp(&b.identity))
    });

    let mut identities = Vec::new();
    for outcome in &ordered {
        let rates = shift_rates(&outcome.records, shift)?;
        let scores = scored_scores(&outcome.records);
        let eas = if scores.is_empty() { None } else { Some(corpus_eas(&scores)?) };
        let mut metrics = BTreeMap::new();
        for (name, values) in &outcome.segment_metrics {
            metrics.insert(name.clone(), mean_std(values)?);
        }
        let copy_failures =
            outcome.records.iter().filter(|r| r.status == ShiftStatus::CopyFailure).count();
        let alignment_failures =
            outcome.records.iter().filter(|r| r.status == ShiftStatus::AlignmentFailure).count();
        identities.push(IdentityReport {
            identity: outcome.identity.clone(),
            group: outcome.group,
            n: outcome.records.len(),
            scored: outcome.records.len() - copy_failures - alignment_failures,
            copy_failures,
            alignment_failures,
            corpus_eas: eas,
            rates,
            metrics,
            corpus_metrics: outcome.corpus_metrics.clone(),
        });
    }

    let mut groups = Vec::new();
    let mut group_rates: BTreeMap<u8, GroupRates> = BTreeMap::new();
    for group in [IdentityGroup::Neutral, IdentityGroup::Bg, IdentityGroup::Nbg] {
        let members: Vec<&&IdentityOutcome> =
            ordered.iter().filter(|o| o.group == group).collect();
        if members.is_empty() {
            continue;
        }
        let pooled: Vec<ShiftRecord> =
            members.iter().flat_map(|o| o.records.iter().cloned()).collect();
        let rates = shift_rates(&pooled, shift)?;
        let scores = scored_scores(&pooled);
        let eas = if scores.is_empty() { None } else { Some(corpus_eas(&scores)?) };
        group_rates.insert(group_rank(group), rates.into());
        groups.push(GroupReport {
            group,
            identities: members.iter().map(|o| o.identity.clone()).collect(),
            n: pooled.len(),
            corpus_eas: eas,
            rates,
        });
    }

    let bg = group_rates.get(&group_rank(IdentityGroup::Bg));
    let nbg = group_rates.get(&group_rank(IdentityGroup::Nbg));
    let (bg, nbg) = match (bg, nbg) {
        (Some(bg), Some(nbg)) => (*bg, *nbg),
        _ => {
            let mut missing = Vec::new();
            if bg.is_none() {
                missing.push("BG identities".to_string());
            }
            if nbg.is_none() {
                missing.push("NBG identities".to_string());
            }
            return Err(Error::Aggregation { missing });
        }
    };
    let sbr = shift_bias_rate(bg, nbg);

    let mut cross_identity = BTreeMap::new();
    for name in &segment_metric_names {
        let means: Vec<f64> = identities.iter().map(|i| i.metrics[name].mean).collect();
        cross_identity.insert(name.clone(), mean_std(&means)?);
    }
    for name in &corpus_metric_names {
        let values: Vec<f64> = identities.iter().map(|i| i.corpus_metrics[name]).collect();
        cross_identity.insert(name.clone(), mean_std(&values)?);
    }
    let eas_values: Vec<f64> = identities.iter().filter_map(|i| i.corpus_eas).collect();
    if !eas_values.is_empty() {
        cross_identity.insert("eas".to_string(), mean_std(&eas_values)?);
    }

    Ok(BiasReport {
        metadata,
        identities,
        groups,
        shift_bias_rate: sbr,
        cross_identity,
        keyword_sets,
    })
}

pub fn render_json(report: &BiasReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

fn push_table(out: &mut String, rows: &[Vec<String>]) {
    let columns = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![0usize; columns];
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    for row in rows {
        let mut line = String::new();
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(cell);
            if i + 1 < row.len() {
                for _ in cell.chars().count()..widths[i] {
                    line.push(' ');
                }
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".to_string())
}

/// Human-readable report with aligned columns.
pub fn render_text(report: &BiasReport) -> String {
    let mut out = String::new();
    out.push_str("translation attitude bias report\n");
    out.push_str(&format!(
        "scorer: {}\ntranslator: {}\ndelta: {}\n",
        report.metadata.scorer, report.metadata.translator, report.metadata.delta
    ));
    out.push_str(&format!("shift denominator: {}\n", report.metadata.shift_denominator));
    out.push_str(&format!(
        "identity EAS denominator: {}\n",
        report.metadata.identity_eas_denominator
    ));
    out.push_str(&format!("spread: {}\n", report.metadata.spread));
    for (key, value) in &report.metadata.extras {
        out.push_str(&format!("{key}: {value}\n"));
    }
    out.push('\n');

    let metric_names: Vec<&String> = report
        .identities
        .first()
        .map(|i| i.metrics.keys().collect())
        .unwrap_or_default();
    let corpus_names: Vec<&String> = report
        .identities
        .first()
        .map(|i| i.corpus_metrics.keys().collect())
        .unwrap_or_default();
    let mut rows = Vec::new();
    let mut header = vec![
        "identity".to_string(),
        "group".to_string(),
        "n".to_string(),
        "scored".to_string(),
        "copy".to_string(),
        "noalign".to_string(),
        "eas".to_string(),
        "R_TN".to_string(),
        "R_TP".to_string(),
    ];
    for name in &metric_names {
        header.push(format!("{name} mean"));
        header.push(format!("{name} std"));
    }
    for name in &corpus_names {
        header.push((*name).clone());
    }
    rows.push(header);
    for identity in &report.identities {
        let mut row = vec![
            identity.identity.clone(),
            identity.group.to_string(),
            identity.n.to_string(),
            identity.scored.to_string(),
            identity.copy_failures.to_string(),
            identity.alignment_failures.to_string(),
            fmt_opt(identity.corpus_eas),
            format!("{:.2}", identity.rates.r_tn),
            format!("{:.2}", identity.rates.r_tp),
        ];
        for name in &metric_names {
            let stat = identity.metrics[*name];
            row.push(format!("{:.4}", stat.mean));
            row.push(format!("{:.4}", stat.std));
        }
        for name in &corpus_names {
            row.push(format!("{:.4}", identity.corpus_metrics[*name]));
        }
        rows.push(row);
    }
    push_table(&mut out, &rows);
    out.push('\n');

    let mut rows = vec![vec![
        "group".to_string(),
        "n".to_string(),
        "eas".to_string(),
        "R_TN".to_string(),
        "R_TP".to_string(),
        "to_neg".to_string(),
        "to_pos".to_string(),
        "stable".to_string(),
        "unscored".to_string(),
        "identities".to_string(),
    ]];
    for group in &report.groups {
        rows.push(vec![
            group.group.to_string(),
            group.n.to_string(),
            fmt_opt(group.corpus_eas),
            format!("{:.2}", group.rates.r_tn),
            format!("{:.2}", group.rates.r_tp),
            group.rates.counts.to_negative.to_string(),
            group.rates.counts.to_positive.to_string(),
            group.rates.counts.stable.to_string(),
            group.rates.counts.unscored.to_string(),
            group.identities.join(","),
        ]);
    }
    push_table(&mut out, &rows);
    out.push('\n');
    out.push_str(&format!("shift bias rate: {:.4}\n", report.shift_bias_rate));
    if !report.cross_identity.is_empty() {
        out.push('\n');
        let mut rows = vec![vec![
            "metric".to_string(),
            "cross-identity mean".to_string(),
            "cross-identity std".to_string(),
        ]];
        for (name, stat) in &report.cross_identity {
            rows.push(vec![name.clone(), format!("{:.4}", stat.mean), format!("{:.4}", stat.std)]);
        }
        push_table(&mut out, &rows);
    }
    if !report.keyword_sets.is_empty() {
        out.push('\n');
        out.push_str("keywords unique to each identity:\n");
        for (identity, words) in &report.keyword_sets {
            let joined: Vec<&str> = words.iter().map(String::as_str).collect();
            out.push_str(&format!("  {identity}: {}\n", joined.join(" ")));
        }
    }
    out
}

fn status_label(status: ShiftStatus) -> &'static str {
    match status {
        ShiftStatus::Scored => "scored",
        ShiftStatus::CopyFailure => "copy_failure",
        ShiftStatus::AlignmentFailure => "alignment_failure",
    }
}

/// Per-identity CSV. Metric columns are `<name>_mean`/`<name>_std` for
/// segment metrics and `<name>` for corpus metrics.
pub fn identity_csv(report: &BiasReport) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let metric_names: Vec<&String> =
        report.identities.first().map(|i| i.metrics.keys().collect()).unwrap_or_default();
    let corpus_names: Vec<&String> =
        report.identities.first().map(|i| i.corpus_metrics.keys().collect()).unwrap_or_default();
    let mut header = vec![
        "identity".to_string(),
        "group".to_string(),
        "n".to_string(),
        "scored".to_string(),
        "copy_failures".to_string(),
        "alignment_failures".to_string(),
        "corpus_eas".to_string(),
        "r_tn".to_string(),
        "r_tp".to_string(),
    ];
    for name in &metric_names {
        header.push(format!("{name}_mean"));
        header.push(format!("{name}_std"));
    }
    for name in &corpus_names {
        header.push((*name).clone());
    }
    writer.write_record(&header).map_err(|e| Error::Input(e.to_string()))?;
    for identity in &report.identities {
        let mut row = vec![
            identity.identity.clone(),
            identity.group.to_string(),
            identity.n.to_string(),
            identity.scored.to_string(),
            identity.copy_failures.to_string(),
            identity.alignment_failures.to_string(),
            identity.corpus_eas.map(|v| v.to_string()).unwrap_or_default(),
            identity.rates.r_tn.to_string(),
            identity.rates.r_tp.to_string(),
        ];
        for name in &metric_names {
            let stat = identity.metrics[*name];
            row.push(stat.mean.to_string());
            row.push(stat.std.to_string());
        }
        for name in &corpus_names {
            row.push(identity.corpus_metrics[*name].to_string());
        }
        writer.write_record(&row).map_err(|e| Error::Input(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Input(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Input(e.to_string()))
}

pub fn group_csv(report: &BiasReport) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "group",
            "identities",
            "n",
            "corpus_eas",
            "r_tn",
            "r_tp",
            "to_negative",
            "to_positive",
            "stable",
            "unscored",
        ])
        .map_err(|e| Error::Input(e.to_string()))?;
    for group in &report.groups {
        writer
            .write_record([
                group.group.to_string(),
                group.identities.join(";"),
                group.n.to_string(),
                group.corpus_eas.map(|v| v.to_string()).unwrap_or_default(),
                group.rates.r_tn.to_string(),
                group.rates.r_tp.to_string(),
                group.rates.counts.to_negative.to_string(),
                group.rates.counts.to_positive.to_string(),
                group.rates.counts.stable.to_string(),
                group.rates.counts.unscored.to_string(),
            ])
            .map_err(|e| Error::Input(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Input(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Input(e.to_string()))
}

/// One point of the source-vs-translation attitude scatter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatterRow {
    pub segment_id: String,
    pub identity: String,
    pub e_src: f64,
    pub e_hypo: Option<f64>,
    pub status: ShiftStatus,
}

pub fn scatter_csv(rows: &[ScatterRow]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["segment_id", "identity", "e_src", "e_hypo", "status"])
        .map_err(|e| Error::Input(e.to_string()))?;
    for row in rows {
        writer
            .write_record([
                row.segment_id.clone(),
                row.identity.clone(),
                row.e_src.to_string(),
                row.e_hypo.map(|v| v.to_string()).unwrap_or_default(),
                status_label(row.status).to_string(),
            ])
            .map_err(|e| Error::Input(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Input(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Input(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_population_std() {
        let stat = mean_std(&[80.0, 70.0]).unwrap();
        assert_eq!(stat.mean, 75.0);
        assert_eq!(stat.std, 5.0);
        assert!(mean_std(&[]).is_err());
    }

    #[test]
    fn mean_std_is_permutation_invariant_bit_for_bit() {
        let values = [0.1, 0.7, 1.3, -2.2, 0.303, 9.9, -0.4];
        let baseline = mean_std(&values).unwrap();
        let mut rotated = values.to_vec();
        for _ in 0..values.len() {
            rotated.rotate_left(1);
            let stat = mean_std(&rotated).unwrap();
            assert_eq!(stat.mean.to_bits(), baseline.mean.to_bits());
            assert_eq!(stat.std.to_bits(), baseline.std.to_bits());
        }
    }

    fn outcome(
        identity: &str,
        group: IdentityGroup,
        records: Vec<ShiftRecord>,
        comet: Vec<f64>,
        bleu: f64,
    ) -> IdentityOutcome {
        IdentityOutcome {
            identity: identity.to_string(),
            group,
            records,
            segment_metrics: BTreeMap::from([("comet".to_string(), comet)]),
            corpus_metrics: BTreeMap::from([("bleu".to_string(), bleu)]),
        }
    }

    fn sample_outcomes() -> Vec<IdentityOutcome> {
        vec![
            outcome(
                "man",
                IdentityGroup::Bg,
                vec![
                    ShiftRecord::scored(1.0, -1.0),
                    ShiftRecord::scored(-1.0, 1.0),
                    ShiftRecord::scored(0.0, 0.0),
                    ShiftRecord::unscored(0.5, ShiftStatus::CopyFailure).unwrap(),
                ],
                vec![0.8, 0.9],
                40.0,
            ),
            outcome(
                "queer",
                IdentityGroup::Nbg,
                vec![
                    ShiftRecord::scored(1.0, -1.0),
                    ShiftRecord::scored(0.0, 0.0),
                    ShiftRecord::scored(0.3, 0.3),
                    ShiftRecord::unscored(0.1, ShiftStatus::AlignmentFailure).unwrap(),
                ],
                vec![0.7, 0.7],
                35.0,
            ),
            outcome(
                "person",
                IdentityGroup::Neutral,
                vec![ShiftRecord::scored(0.0, 0.0), ShiftRecord::scored(1.0, 1.0)],
                vec![0.9, 0.9],
                45.0,
            ),
        ]
    }

    #[test]
    fn aggregation_produces_the_expected_headline_numbers() {
        let report = aggregate_report(
            &sample_outcomes(),
            &ShiftConfig::default(),
            BTreeMap::new(),
            ReportMetadata::new("fixture", "fixture", 0.2),
        )
        .unwrap();
        // Sorted neutral, then binary, then non-binary.
        let names: Vec<&str> = report.identities.iter().map(|i| i.identity.as_str()).collect();
        assert_eq!(names, ["person", "man", "queer"]);
        let man = &report.identities[1];
        assert_eq!(man.n, 4);
        assert_eq!(man.scored, 3);
        assert_eq!(man.copy_failures, 1);
        assert_eq!(man.rates.r_tn, 25.0);
        assert_eq!(man.rates.r_tp, 25.0);
        assert_eq!(man.corpus_eas, Some(0.0));
        let queer = &report.identities[2];
        assert_eq!(queer.rates.r_tn, 25.0);
        assert_eq!(queer.rates.r_tp, 0.0);
        // BG flips back more and flips away equally: 25-0 + 25-25 = 25.
        assert_eq!(report.shift_bias_rate, 25.0);
        assert_eq!(report.groups.len(), 3);
        let bg = report.groups.iter().find(|g| g.group == IdentityGroup::Bg).unwrap();
        assert_eq!(bg.n, 4);
        assert_eq!(bg.identities, ["man"]);
        let comet = report.cross_identity["comet"];
        assert!((comet.mean - (0.85 + 0.7 + 0.9) / 3.0).abs() < 1e-12);
        let bleu = report.cross_identity["bleu"];
        assert!((bleu.mean - 40.0).abs() < 1e-12);
        assert!(report.cross_identity.contains_key("eas"));
    }

    #[test]
    fn metric_gaps_are_reported_per_identity() {
        let mut outcomes = sample_outcomes();
        outcomes[1].segment_metrics.clear();
        let err = aggregate_report(
            &outcomes,
            &ShiftConfig::default(),
            BTreeMap::new(),
            ReportMetadata::new("fixture", "fixture", 0.2),
        )
        .unwrap_err();
        match err {
            Error::Aggregation { missing } => assert_eq!(missing, ["queer:comet"]),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn a_missing_group_is_an_aggregation_error() {
        let outcomes: Vec<IdentityOutcome> =
            sample_outcomes().into_iter().filter(|o| o.group != IdentityGroup::Nbg).collect();
        let err = aggregate_report(
            &outcomes,
            &ShiftConfig::default(),
            BTreeMap::new(),
            ReportMetadata::new("fixture", "fixture", 0.2),
        )
        .unwrap_err();
        match err {
            Error::Aggregation { missing } => assert_eq!(missing, ["NBG identities"]),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn renderers_are_deterministic_and_complete() {
        let keywords = BTreeMap::from([(
            "man".to_string(),
            BTreeSet::from(["他".to_string(), "固执".to_string()]),
        )]);
        let report = aggregate_report(
            &sample_outcomes(),
            &ShiftConfig::default(),
            keywords,
            ReportMetadata::new("fixture-scorer", "fixture-translator", 0.2),
        )
        .unwrap();
        let json = render_json(&report).unwrap();
        assert!(json.ends_with('\n'));
        let parsed: BiasReport = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.shift_bias_rate, report.shift_bias_rate);
        assert_eq!(render_json(&parsed).unwrap(), json);

        let text = render_text(&report);
        assert!(text.contains("shift bias rate: 25.0000"));
        assert!(text.contains("fixture-scorer"));
        assert!(text.contains("scored records only"));
        assert!(text.contains("all records including unscored"));
        assert!(text.contains("keywords unique to each identity:"));

        let identity_table = identity_csv(&report).unwrap();
        let mut lines = identity_table.lines();
        assert_eq!(
            lines.next().unwrap(),
            "identity,group,n,scored,copy_failures,alignment_failures,corpus_eas,r_tn,r_tp,comet_mean,comet_std,bleu"
        );
        assert_eq!(identity_table.lines().count(), 4);

        let group_table = group_csv(&report).unwrap();
        assert_eq!(group_table.lines().count(), 4);
        assert!(group_table.contains("BG"));

        let scatter = scatter_csv(&[
            ScatterRow {
                segment_id: "s1".into(),
                identity: "man".into(),
                e_src: 1.5,
                e_hypo: Some(-0.5),
                status: ShiftStatus::Scored,
            },
            ScatterRow {
                segment_id: "s2".into(),
                identity: "man".into(),
                e_src: 0.5,
                e_hypo: None,
                status: ShiftStatus::CopyFailure,
            },
        ])
        .unwrap();
        assert!(scatter.contains("s1,man,1.5,-0.5,scored"));
        assert!(scatter.contains("s2,man,0.5,,copy_failure"));
    }
}
