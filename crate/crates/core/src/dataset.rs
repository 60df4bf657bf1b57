//! Labeled 60-second samples from expert coding sheets and transcripts.
//!
//! Positive windows are the 60 s leading up to and including an annotated
//! time of need. Negative windows partition quiet gaps of at least five
//! minutes between consecutive codes into non-overlapping 60 s chunks, with
//! the session start and end acting as virtual codes.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Window length in seconds.
pub const WINDOW_S: f64 = 60.0;
/// Minimum code-to-code gap that yields negative samples.
pub const QUIET_GAP_S: f64 = 300.0;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("coding sheet {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("coding sheet row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("coding sheet has no rows")]
    EmptySheet,
    #[error("transcript line {line}: {reason}")]
    MalformedTranscript { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub session_id: String,
    pub timestamp_s: f64,
    pub code: String,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    #[serde(rename = "t0")]
    pub t0_s: f64,
    #[serde(rename = "t1")]
    pub t1_s: f64,
    pub speaker: String,
    pub text: String,
}

impl Utterance {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.t0_s + self.t1_s)
    }
}

/// Half-open-for-attachment time bounds of a window, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub t0: f64,
    pub t1: f64,
}

impl Window {
    fn key(self) -> (u64, u64) {
        (self.t0.to_bits(), self.t1.to_bits())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub session_id: String,
    #[serde(rename = "t0")]
    pub t0_s: f64,
    #[serde(rename = "t1")]
    pub t1_s: f64,
    pub utterances: Vec<Utterance>,
}

impl Segment {
    /// Stable identifier used for resumable processing.
    pub fn id(&self) -> String {
        format!("{}@{}-{}", self.session_id, self.t0_s, self.t1_s)
    }

    /// Transcript text, one `speaker: text` line per utterance.
    pub fn text(&self) -> String {
        self.utterances
            .iter()
            .map(|u| format!("{}: {}", u.speaker, u.text))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.iter().all(|u| u.text.trim().is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub segment: Segment,
    pub label: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_annotation: Option<Annotation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCounts {
    pub id: String,
    pub n_pos: usize,
    pub n_neg: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub sessions: Vec<SessionCounts>,
    pub total_pos: usize,
    pub total_neg: usize,
}

/// One session's raw material.
#[derive(Debug, Clone)]
pub struct SessionInput {
    pub session_id: String,
    pub utterances: Vec<Utterance>,
    pub annotations: Vec<Annotation>,
    pub duration_s: f64,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub manifest: Manifest,
    /// Annotations ignored because they fall after the session end.
    pub skipped_annotations: usize,
}

pub fn parse_coding_sheet(path: &Path) -> Result<Vec<Annotation>, DatasetError> {
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_coding_sheet_from(file)
}

#[derive(Deserialize)]
struct SheetRow {
    session_id: String,
    timestamp_s: String,
    code: String,
    rationale: String,
}

pub fn parse_coding_sheet_from<R: std::io::Read>(reader: R) -> Result<Vec<Annotation>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<SheetRow>().enumerate() {
        // header is line 1
        let row = i + 2;
        let rec = rec.map_err(|e| DatasetError::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        let t: f64 = rec.timestamp_s.parse().map_err(|_| DatasetError::MalformedRow {
            row,
            reason: format!("timestamp `{}` is not a number", rec.timestamp_s),
        })?;
        if !t.is_finite() || t < 0.0 {
            return Err(DatasetError::MalformedRow {
                row,
                reason: format!("timestamp {t} must be a non-negative number"),
            });
        }
        if rec.rationale.is_empty() {
            return Err(DatasetError::MalformedRow {
                row,
                reason: "rationale is empty".into(),
            });
        }
        out.push(Annotation {
            session_id: rec.session_id,
            timestamp_s: t,
            code: rec.code,
            rationale: rec.rationale,
        });
    }
    if out.is_empty() {
        return Err(DatasetError::EmptySheet);
    }
    Ok(out)
}

/// Reads a JSON Lines transcript; blank lines are skipped.
pub fn read_transcript<R: BufRead>(reader: R) -> Result<Vec<Utterance>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| DatasetError::MalformedTranscript {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let u: Utterance = serde_json::from_str(&line).map_err(|e| DatasetError::MalformedTranscript {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if !(u.t0_s >= 0.0 && u.t0_s < u.t1_s) {
            return Err(DatasetError::MalformedTranscript {
                line: i + 1,
                reason: format!("need 0 <= t0 < t1, got [{}, {}]", u.t0_s, u.t1_s),
            });
        }
        out.push(u);
    }
    out.sort_by(|a, b| a.t0_s.total_cmp(&b.t0_s));
    Ok(out)
}

fn sorted_times(annotations: &[Annotation]) -> Vec<f64> {
    let mut ts: Vec<f64> = annotations.iter().map(|a| a.timestamp_s).collect();
    ts.sort_by(f64::total_cmp);
    ts
}

/// Positive windows, one per annotation inside the session, plus the number skipped.
///
/// The window for an annotation at `t` is `[t − 60, t]`; annotations before
/// the first minute map to `[0, 60]`. Windows may overlap.
pub fn positive_windows(annotations: &[Annotation], session_duration_s: f64) -> (Vec<Window>, usize) {
    let mut skipped = 0;
    let mut out = Vec::new();
    for t in sorted_times(annotations) {
        if t > session_duration_s {
            skipped += 1;
            continue;
        }
        out.push(Window {
            t0: (t - WINDOW_S).max(0.0),
            t1: t.max(WINDOW_S),
        });
    }
    if skipped > 0 {
        tracing::warn!(skipped, "annotations past session end ignored");
    }
    (out, skipped)
}

/// Negative windows from quiet gaps of at least five minutes.
pub fn negative_windows(annotations: &[Annotation], session_duration_s: f64) -> Vec<Window> {
    let mut bounds = vec![0.0];
    bounds.extend(
        sorted_times(annotations)
            .into_iter()
            .filter(|&t| t <= session_duration_s),
    );
    bounds.push(session_duration_s);

    let mut out = Vec::new();
    for pair in bounds.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b - a < QUIET_GAP_S {
            continue;
        }
        let chunks = ((b - a) / WINDOW_S).floor() as usize;
        out.extend((0..chunks).map(|i| Window {
            t0: a + WINDOW_S * i as f64,
            t1: a + WINDOW_S * (i + 1) as f64,
        }));
    }
    out
}

/// Utterances whose midpoint lies in `[t0, t1)`, sorted by start time.
pub fn attach_utterances(utterances: &[Utterance], w: Window) -> Vec<Utterance> {
    let mut out: Vec<Utterance> = utterances
        .iter()
        .filter(|u| {
            let m = u.midpoint();
            m >= w.t0 && m < w.t1
        })
        .cloned()
        .collect();
    out.sort_by(|a, b| a.t0_s.total_cmp(&b.t0_s));
    out
}

/// Materializes positive and negative samples for every session.
///
/// Duplicate positive windows collapse to one. A negative chunk with the same
/// bounds as a positive window is dropped, so the two classes never share a key.
pub fn build_dataset(sessions: &[SessionInput]) -> Dataset {
    let mut samples = Vec::new();
    let mut counts = Vec::new();
    let mut skipped_total = 0;

    for s in sessions {
        let annotations: Vec<&Annotation> = s
            .annotations
            .iter()
            .filter(|a| a.session_id == s.session_id)
            .collect();
        let owned: Vec<Annotation> = annotations.iter().map(|a| (*a).clone()).collect();

        let (pos, skipped) = positive_windows(&owned, s.duration_s);
        skipped_total += skipped;

        // first annotation (in time order) that produced each window
        let mut by_key: BTreeMap<(u64, u64), (Window, Annotation)> = BTreeMap::new();
        let mut ordered_keys = Vec::new();
        let mut in_session: Vec<&Annotation> = annotations
            .iter()
            .copied()
            .filter(|a| a.timestamp_s <= s.duration_s)
            .collect();
        in_session.sort_by(|a, b| a.timestamp_s.total_cmp(&b.timestamp_s));
        for (w, a) in pos.iter().zip(in_session) {
            if let std::collections::btree_map::Entry::Vacant(e) = by_key.entry(w.key()) {
                e.insert((*w, a.clone()));
                ordered_keys.push(w.key());
            }
        }
        let pos_keys: BTreeSet<(u64, u64)> = by_key.keys().copied().collect();

        let neg: Vec<Window> = negative_windows(&owned, s.duration_s)
            .into_iter()
            .filter(|w| !pos_keys.contains(&w.key()))
            .collect();

        for key in &ordered_keys {
            let (w, a) = &by_key[key];
            samples.push(LabeledSample {
                segment: make_segment(&s.session_id, &s.utterances, *w),
                label: 1,
                source_annotation: Some(a.clone()),
            });
        }
        for w in &neg {
            samples.push(LabeledSample {
                segment: make_segment(&s.session_id, &s.utterances, *w),
                label: 0,
                source_annotation: None,
            });
        }
        counts.push(SessionCounts {
            id: s.session_id.clone(),
            n_pos: ordered_keys.len(),
            n_neg: neg.len(),
        });
    }

    let manifest = Manifest {
        total_pos: counts.iter().map(|c| c.n_pos).sum(),
        total_neg: counts.iter().map(|c| c.n_neg).sum(),
        sessions: counts,
    };
    Dataset {
        samples,
        manifest,
        skipped_annotations: skipped_total,
    }
}

fn make_segment(session_id: &str, utterances: &[Utterance], w: Window) -> Segment {
    Segment {
        session_id: session_id.to_string(),
        t0_s: w.t0,
        t1_s: w.t1,
        utterances: attach_utterances(utterances, w),
    }
}
