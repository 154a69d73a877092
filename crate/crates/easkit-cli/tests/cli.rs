//! Behavior checks for the command-line surface: error reporting, cache
//! reuse, prompt switches, and the agreement subcommand.

mod common;

use common::*;

#[test]
fn malformed_corpus_lines_report_their_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let good = slotted("p0", "[IDENTITY] is fine today.", "[IDENTITY]今天很好。", "fine");
    let corpus = format!("{}\n{{broken\n", serde_json::to_string(&good).unwrap());
    std::fs::write(dir.path().join("corpus.jsonl"), corpus).unwrap();
    std::fs::write(dir.path().join("scores.json"), "{}").unwrap();
    std::fs::write(dir.path().join("translations.json"), "{}").unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "corpus = \"corpus.jsonl\"\nout_dir = \"out\"\n\n\
         [scorer]\nkind = \"fixture\"\nmodel = \"m\"\npath = \"scores.json\"\n\n\
         [translator]\nkind = \"fixture\"\nname = \"t\"\npath = \"translations.json\"\n",
    )
    .unwrap();

    let output = run_cli(dir.path(), &["expand", "--config", "run.toml"]);
    assert!(!output.status.success(), "expand accepted a broken corpus line");
    let stderr = stderr_of(&output);
    assert!(stderr.contains("parse error at line 2"), "stderr was: {stderr}");
}

#[test]
fn translate_resumes_from_the_cache_without_its_fixture() {
    let dir = tempfile::tempdir().unwrap();
    write_world(dir.path(), 4);
    assert_cli_ok(&run_cli(dir.path(), &["expand", "--config", "run.toml"]));
    assert_cli_ok(&run_cli(dir.path(), &["translate", "--config", "run.toml"]));

    let person = dir.path().join("out").join("hypotheses").join("person.jsonl");
    let first = std::fs::read(&person).unwrap();
    assert!(!first.is_empty());

    // Drop the outputs and gut the fixture: every hypothesis must now come
    // back from the cache alone.
    std::fs::remove_dir_all(dir.path().join("out").join("hypotheses")).unwrap();
    std::fs::write(dir.path().join("translations.json"), "{}").unwrap();
    assert_cli_ok(&run_cli(dir.path(), &["translate", "--config", "run.toml"]));
    let resumed = std::fs::read(&person).unwrap();
    assert_eq!(first, resumed, "cache replay changed the hypotheses");

    // Without the cache the gutted fixture has nothing to answer with.
    std::fs::remove_file(dir.path().join("cache.jsonl")).unwrap();
    let output = run_cli(dir.path(), &["translate", "--config", "run.toml"]);
    assert!(!output.status.success(), "translate succeeded with no cache and no fixture");
}

#[test]
fn prompt_flags_switch_the_constrained_blocks_on() {
    let dir = tempfile::tempdir().unwrap();
    write_world(dir.path(), 4);
    assert_cli_ok(&run_cli(dir.path(), &["expand", "--config", "run_plain.toml"]));

    // The fixture only knows the constrained prompts, so the plain config
    // cannot translate.
    let output = run_cli(dir.path(), &["translate", "--config", "run_plain.toml"]);
    assert!(!output.status.success(), "plain prompts should miss the fixture");

    // The switches override the config and restore the constrained blocks.
    let output = run_cli(
        dir.path(),
        &["translate", "--config", "run_plain.toml", "--moral", "--lexical"],
    );
    assert_cli_ok(&output);
    let person = dir.path().join("out").join("hypotheses").join("person.jsonl");
    let lines = std::fs::read_to_string(&person).unwrap();
    assert_eq!(lines.lines().count(), 4);
}

#[test]
fn kappa_reports_agreement_between_two_label_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.csv"), "label\n1\n1\n1\n-1\n").unwrap();
    std::fs::write(dir.path().join("b.csv"), "label\n1\n1\n-1\n-1\n").unwrap();

    let output = run_cli(dir.path(), &["kappa", "a.csv", "b.csv"]);
    assert_cli_ok(&output);
    let stdout = stdout_of(&output);
    assert!(stdout.contains("n: 4"), "stdout was: {stdout}");
    assert!(stdout.contains("kappa: 0.5"), "stdout was: {stdout}");
    assert!(
        stdout.contains("confusion counts (rows: first file, columns: second file):"),
        "stdout was: {stdout}"
    );
}

#[test]
fn expand_partial_failures_need_the_allow_flag() {
    let dir = tempfile::tempdir().unwrap();
    write_world(dir.path(), 1);
    let good = slotted("p0", "[IDENTITY] is fine today.", "[IDENTITY]今天很好。", "fine");
    // The tracked word repeats, so no identity can pin down its position.
    let ambiguous =
        slotted("p1", "[IDENTITY] is great great.", "[IDENTITY]今天很好。", "great");
    let corpus = format!(
        "{}\n{}\n",
        serde_json::to_string(&good).unwrap(),
        serde_json::to_string(&ambiguous).unwrap()
    );
    std::fs::write(dir.path().join("corpus.jsonl"), corpus).unwrap();

    let output = run_cli(dir.path(), &["expand", "--config", "run.toml"]);
    assert!(!output.status.success(), "expand ignored the failures");
    assert!(stderr_of(&output).contains("--allow-partial"));

    let output =
        run_cli(dir.path(), &["expand", "--config", "run.toml", "--allow-partial"]);
    assert_cli_ok(&output);
    assert!(stdout_of(&output).contains("(14 failures)"));

    let failures =
        std::fs::read_to_string(dir.path().join("out").join("expand_failures.jsonl")).unwrap();
    assert_eq!(failures.lines().count(), 14);
    for line in failures.lines() {
        let entry: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(entry["id"], "p1");
    }
    let realized =
        std::fs::read_to_string(dir.path().join("out").join("realized").join("person.jsonl"))
            .unwrap();
    assert_eq!(realized.lines().count(), 1);
}
