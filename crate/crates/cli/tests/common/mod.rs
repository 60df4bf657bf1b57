#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const DURATION: i64 = 1800;

const STRUGGLE: [&str; 5] = [
    "I feel so lonely since the move",
    "Whatever, it does not matter",
    "Honestly nothing needs to change",
    "I am scared it will happen again",
    "This is all too hard for me",
];
const NEUTRAL: [&str; 5] = [
    "Thank you for sharing that",
    "Good morning to everyone",
    "What do you think about the plan",
    "I am proud of my progress",
    "We went to the park on Sunday",
];

pub struct Corpus {
    pub transcripts: PathBuf,
    pub codes: PathBuf,
    pub durations: PathBuf,
    /// Integer code times per session, in session order.
    pub code_times: Vec<(String, Vec<i64>)>,
}

/// Deterministic sessions where the minute before each code sounds distressed.
pub fn write_corpus(root: &Path, sessions: usize) -> Corpus {
    let transcripts = root.join("transcripts");
    std::fs::create_dir_all(&transcripts).unwrap();
    let mut sheet = String::from("session_id,timestamp_s,code,rationale\n");
    let mut durations = String::from("session_id,duration_s\n");
    let mut code_times = Vec::new();
    for k in 0..sessions {
        let id = format!("g{k:02}");
        let codes = vec![100 + 37 * k as i64, 400 + 53 * k as i64];
        for &c in &codes {
            sheet.push_str(&format!("{id},{c},Support,member withdrew\n"));
        }
        durations.push_str(&format!("{id},{DURATION}\n"));
        let mut lines = String::new();
        for (j, t) in (0..DURATION).step_by(10).enumerate() {
            let near = codes.iter().any(|&c| t >= c - 60 && t < c);
            // every seventh line crosses over so the classes overlap a little
            let distressed = near != (j % 7 == 3);
            let pool = if distressed { &STRUGGLE } else { &NEUTRAL };
            let u = serde_json::json!({
                "t0": t, "t1": t + 8,
                "speaker": format!("P{}", j % 4),
                "text": pool[(j * 3 + k) % pool.len()],
            });
            lines.push_str(&u.to_string());
            lines.push('\n');
        }
        std::fs::write(transcripts.join(format!("{id}.jsonl")), lines).unwrap();
        code_times.push((id, codes));
    }
    let codes = root.join("codes.csv");
    std::fs::write(&codes, sheet).unwrap();
    let durations_path = root.join("durations.csv");
    std::fs::write(&durations_path, durations).unwrap();
    Corpus {
        transcripts,
        codes,
        durations: durations_path,
        code_times,
    }
}

pub fn cofac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cofac"))
        .args(args)
        .env_remove("RUST_LOG")
        .env_remove("COFAC_BACKEND_KEY")
        .output()
        .expect("run cofac")
}

pub fn ok(args: &[&str]) -> String {
    let out = cofac(args);
    assert!(
        out.status.success(),
        "cofac {args:?} failed: {}\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Builds the dataset and extracts features; returns (dataset dir, features file).
pub fn features(root: &Path, sessions: usize) -> (PathBuf, PathBuf) {
    let corpus = write_corpus(root, sessions);
    let ds = root.join("ds");
    ok(&[
        "build-dataset",
        "--transcripts",
        p(&corpus.transcripts),
        "--codes",
        p(&corpus.codes),
        "--durations",
        p(&corpus.durations),
        "--out",
        p(&ds),
    ]);
    let feats = root.join("features.jsonl");
    ok(&["extract", "--dataset", p(&ds), "--backend", "mock", "--out", p(&feats)]);
    (ds, feats)
}
