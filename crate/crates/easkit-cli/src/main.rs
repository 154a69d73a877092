//! Command-line driver for the attitude-shift evaluation pipeline.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use easkit::agreement::{cohen_kappa, load_labels};
use easkit::config::RunConfig;
use easkit::pipeline::{
    run_expand, run_report, run_score, run_seeds, run_translate, ExpandSummary, OutputLayout,
};
use easkit::report::render_text;

#[derive(Parser)]
#[command(
    name = "easkit",
    version,
    about = "Measures how translation shifts the attitude of ambiguous words across gender identities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config file plus command-line overrides shared by the pipeline commands.
#[derive(Args)]
struct ConfigArgs {
    /// Run configuration file.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,

    /// Override any config field by dotted path, e.g. --set delta=0.3
    /// or --set aligner.iterations=5. May be given multiple times.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_key_value)]
    set: Vec<(String, String)>,

    /// Write outputs under this directory instead of the configured one.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Dead zone half-width for shift classification.
    #[arg(long)]
    delta: Option<f64>,

    /// Maximum concurrent backend requests.
    #[arg(long)]
    parallelism: Option<usize>,

    /// Prepend the fairness instruction to every prompt.
    #[arg(long, overrides_with = "no_moral")]
    moral: bool,
    /// Leave the fairness instruction out.
    #[arg(long, overrides_with = "moral")]
    no_moral: bool,

    /// Prepend the identity-term translation block to every prompt.
    #[arg(long, overrides_with = "no_lexical")]
    lexical: bool,
    /// Leave the identity-term translation block out.
    #[arg(long, overrides_with = "lexical")]
    no_lexical: bool,
}

fn parse_key_value(raw: &str) -> Result<(String, String), String> {
    match raw.split_once('=') {
        Some((key, value)) if !key.trim().is_empty() => {
            Ok((key.trim().to_string(), value.to_string()))
        }
        _ => Err(format!("expected KEY=VALUE, got {raw:?}")),
    }
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut overrides = self.set.clone();
        if self.moral {
            overrides.push(("prompt.moral_context".into(), "true".into()));
        }
        if self.no_moral {
            overrides.push(("prompt.moral_context".into(), "false".into()));
        }
        if self.lexical {
            overrides.push(("prompt.lexical_block".into(), "true".into()));
        }
        if self.no_lexical {
            overrides.push(("prompt.lexical_block".into(), "false".into()));
        }
        if let Some(delta) = self.delta {
            overrides.push(("delta".into(), delta.to_string()));
        }
        if let Some(parallelism) = self.parallelism {
            overrides.push(("parallelism".into(), parallelism.to_string()));
        }
        let mut config = RunConfig::load_with_overrides(&self.config, &overrides)
            .with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(out_dir) = &self.out_dir {
            // Resolved against the working directory, unlike config paths.
            config.out_dir = out_dir.clone();
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Realize the slotted corpus once per identity profile.
    Expand {
        #[command(flatten)]
        config: ConfigArgs,
        /// Keep going when some pairs cannot be realized for an identity.
        #[arg(long)]
        allow_partial: bool,
    },
    /// Translate every realized sentence.
    Translate {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Find each tracked word in the hypotheses and score the attitude shift.
    Score {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Aggregate scored records into the bias report.
    Report {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Expand, translate, score and report in one go.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Keep going when some pairs cannot be realized for an identity.
        #[arg(long)]
        allow_partial: bool,
    },
    /// Score candidate words and keep the ambiguous band.
    Seeds {
        #[command(flatten)]
        config: ConfigArgs,
        /// Also translate each kept word in a short sentence per identity
        /// and score the translations.
        #[arg(long)]
        scan: bool,
    },
    /// Inter-rater agreement between two label files.
    ///
    /// Each CSV names either a `label` column with values -1, 0, 1, or
    /// `s1` and `s2` sentiment score columns whose difference is banded
    /// into those labels.
    Kappa { first: PathBuf, second: PathBuf },
}

fn check_expand(config: &RunConfig, summary: &ExpandSummary, allow_partial: bool) -> anyhow::Result<()> {
    println!(
        "realized {} pairs for each of {} identities ({} failures)",
        summary.pairs_per_identity, summary.identities, summary.failures
    );
    if summary.failures > 0 && !allow_partial {
        let failures = OutputLayout::new(&config.out_dir).expand_failures();
        bail!(
            "{} pairs could not be realized for every identity; details in {} \
             (use --allow-partial to continue)",
            summary.failures,
            failures.display()
        );
    }
    Ok(())
}

fn print_kappa(first: &PathBuf, second: &PathBuf) -> anyhow::Result<()> {
    let a = load_labels(first)?;
    let b = load_labels(second)?;
    let kappa = cohen_kappa(&a, &b)?;
    println!("n: {}", a.len());
    println!("kappa: {kappa}");
    let mut labels: Vec<i8> = a.iter().chain(&b).copied().collect();
    labels.sort_unstable();
    labels.dedup();
    let mut counts: BTreeMap<(i8, i8), usize> = BTreeMap::new();
    for (x, y) in a.iter().zip(&b) {
        *counts.entry((*x, *y)).or_default() += 1;
    }
    println!("confusion counts (rows: first file, columns: second file):");
    print!("{:>6}", "");
    for label in &labels {
        print!("{label:>6}");
    }
    println!();
    for x in &labels {
        print!("{x:>6}");
        for y in &labels {
            print!("{:>6}", counts.get(&(*x, *y)).copied().unwrap_or(0));
        }
        println!();
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Expand { config, allow_partial } => {
            let config = config.load()?;
            let summary = run_expand(&config)?;
            check_expand(&config, &summary, allow_partial)?;
        }
        Command::Translate { config } => {
            let config = config.load()?;
            let summary = run_translate(&config)?;
            println!(
                "translated {} sentences across {} identities",
                summary.sentences, summary.identities
            );
        }
        Command::Score { config } => {
            let config = config.load()?;
            let summary = run_score(&config)?;
            println!(
                "scored {} records ({} copy failures, {} without alignment)",
                summary.records, summary.copy_failures, summary.alignment_failures
            );
        }
        Command::Report { config } => {
            let config = config.load()?;
            let report = run_report(&config)?;
            print!("{}", render_text(&report));
            println!("report written to {}", OutputLayout::new(&config.out_dir).report_json().display());
        }
        Command::Run { config, allow_partial } => {
            let config = config.load()?;
            let summary = run_expand(&config)?;
            check_expand(&config, &summary, allow_partial)?;
            let translated = run_translate(&config)?;
            println!(
                "translated {} sentences across {} identities",
                translated.sentences, translated.identities
            );
            let scored = run_score(&config)?;
            println!(
                "scored {} records ({} copy failures, {} without alignment)",
                scored.records, scored.copy_failures, scored.alignment_failures
            );
            let report = run_report(&config)?;
            print!("{}", render_text(&report));
            println!("report written to {}", OutputLayout::new(&config.out_dir).report_json().display());
        }
        Command::Seeds { config, scan } => {
            let config = config.load()?;
            let summary = run_seeds(&config, scan)?;
            println!(
                "scored {} candidate words, kept {} ambiguous ones",
                summary.candidates, summary.selected
            );
            if let Some(failures) = summary.scan_failures {
                println!("context scan finished with {failures} failures");
            }
        }
        Command::Kappa { first, second } => print_kappa(&first, &second)?,
    }
    Ok(())
}
