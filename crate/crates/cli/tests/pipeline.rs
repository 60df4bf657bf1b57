mod common;

use common::*;
use cofac_testkit::windows;

#[test]
fn every_command_has_help() {
    for cmd in [
        vec!["--help"],
        vec!["build-dataset", "--help"],
        vec!["extract", "--help"],
        vec!["train", "--help"],
        vec!["evaluate", "--help"],
        vec!["replay", "--help"],
        vec!["serve", "--help"],
    ] {
        let out = cofac(&cmd);
        assert!(out.status.success(), "{cmd:?}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_ne!(cofac(&["train", "--bogus"]).status.code(), Some(0));
}

#[test]
fn build_dataset_counts_match_enumerator() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path(), 4);
    let out = dir.path().join("ds");
    let stdout = ok(&[
        "build-dataset",
        "--transcripts",
        p(&corpus.transcripts),
        "--codes",
        p(&corpus.codes),
        "--durations",
        p(&corpus.durations),
        "--out",
        p(&out),
    ]);
    let (mut pos, mut neg) = (0, 0);
    for (_, codes) in &corpus.code_times {
        let (ps, ns) = windows::enumerate(codes, DURATION);
        pos += ps.len();
        neg += ns.len();
    }
    assert!(stdout.contains(&format!("positive  {pos}")), "{stdout}");
    assert!(stdout.contains(&format!("negative  {neg}")), "{stdout}");
    let lines = std::fs::read_to_string(out.join("segments.jsonl")).unwrap().lines().count();
    assert_eq!(lines, pos + neg);
    assert!(out.join("manifest.json").is_file());
}

#[test]
fn empty_coding_sheet_warns_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path(), 1);
    std::fs::write(&corpus.codes, "session_id,timestamp_s,code,rationale\n").unwrap();
    let out = cofac(&[
        "build-dataset",
        "--transcripts",
        p(&corpus.transcripts),
        "--codes",
        p(&corpus.codes),
        "--out",
        p(&dir.path().join("ds")),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("positive  0"));
}

#[test]
fn code_for_missing_transcript_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path(), 1);
    std::fs::write(&corpus.codes, "session_id,timestamp_s,code,rationale\nnope,100,Support,x\n").unwrap();
    let out = cofac(&[
        "build-dataset",
        "--transcripts",
        p(&corpus.transcripts),
        "--codes",
        p(&corpus.codes),
        "--out",
        p(&dir.path().join("ds")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn extract_is_deterministic_resumable_and_order_stable() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, feats) = features(dir.path(), 3);
    let full = std::fs::read_to_string(&feats).unwrap();
    let n = full.lines().count();
    assert!(n > 0);

    // rerun is a no-op
    ok(&["extract", "--dataset", p(&ds), "--out", p(&feats)]);
    assert_eq!(std::fs::read_to_string(&feats).unwrap(), full);

    // parallel extraction writes the same bytes
    let par = dir.path().join("par.jsonl");
    ok(&["extract", "--dataset", p(&ds), "--out", p(&par), "--jobs", "4"]);
    assert_eq!(std::fs::read_to_string(&par).unwrap(), full);

    // interrupted run: half the rows plus a torn line, then resume
    let half: String = full.lines().take(n / 2).map(|l| format!("{l}\n")).collect();
    std::fs::write(&feats, format!("{half}{{\"segment_id\":\"g0")).unwrap();
    ok(&["extract", "--dataset", p(&ds), "--out", p(&feats)]);
    assert_eq!(std::fs::read_to_string(&feats).unwrap(), full);
}

#[test]
fn remote_backend_without_key_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path(), 1);
    let ds = dir.path().join("ds");
    ok(&["build-dataset", "--transcripts", p(&corpus.transcripts), "--codes", p(&corpus.codes), "--out", p(&ds)]);
    let out = cofac(&["extract", "--dataset", p(&ds), "--backend", "remote", "--out", p(&dir.path().join("f.jsonl"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("COFAC_BACKEND_KEY"));
}

#[test]
fn train_writes_model_and_feature_report() {
    let dir = tempfile::tempdir().unwrap();
    let (_, feats) = features(dir.path(), 6);
    let model = dir.path().join("models/cbm.json");
    let stdout = ok(&["train", "--features", p(&feats), "--C", "1.0", "--l1-ratio", "0.5", "--out", p(&model)]);
    assert!(stdout.contains("odds ratio"), "{stdout}");
    assert!(model.is_file());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("models/cbm.features.json")).unwrap()).unwrap();
    let rows = report.as_array().unwrap();
    assert_eq!(rows.len(), 14);
    for r in rows {
        let coef = r["coefficient"].as_f64().unwrap();
        let or = r["odds_ratio"].as_f64().unwrap();
        assert!((or - coef.exp()).abs() <= 1e-12 * coef.exp().max(1.0), "{r}");
    }
}

#[test]
fn train_on_one_class_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let (_, feats) = features(dir.path(), 2);
    let text = std::fs::read_to_string(&feats).unwrap().replace("\"label\":1", "\"label\":0");
    std::fs::write(&feats, text).unwrap();
    let out = cofac(&["train", "--features", p(&feats), "--out", p(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("single class"));
}

#[test]
fn cross_validation_is_seeded_and_reports_every_fold() {
    let dir = tempfile::tempdir().unwrap();
    let (_, feats) = features(dir.path(), 6);
    let run = |seed: &str| ok(&["evaluate", "--features", p(&feats), "--cv", "5", "--seed", seed]);
    let a = run("7");
    assert_eq!(a, run("7"));
    let folds: Vec<serde_json::Value> = a
        .lines()
        .filter(|l| l.starts_with('{'))
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(folds.len(), 5);
    let total: u64 = folds.iter().map(|f| f["n_test"].as_u64().unwrap()).sum();
    assert_eq!(total as usize, std::fs::read_to_string(&feats).unwrap().lines().count());
}

#[test]
fn evaluate_scores_a_trained_model() {
    let dir = tempfile::tempdir().unwrap();
    let (_, feats) = features(dir.path(), 4);
    let model = dir.path().join("m.json");
    ok(&["train", "--features", p(&feats), "--out", p(&model)]);
    let stdout = ok(&["evaluate", "--features", p(&feats), "--model", p(&model)]);
    assert!(stdout.contains("model"), "{stdout}");
    assert_eq!(cofac(&["evaluate", "--features", p(&feats)]).status.code(), Some(1));
}
