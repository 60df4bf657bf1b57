//! Test-time concept editing.
//!
//! A human corrects one concept of a segment's working vector and the
//! decision is recomputed without retraining. The machine extraction is never
//! modified; the edit log is the diff chain from it to the working vector.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advisor::SegmentRef;
use crate::classifier::{CbmModel, ClassifierError};
use crate::jsonl;
use crate::schema::{ConceptKind, ConceptSchema, ConceptVector};

#[derive(Debug, Error)]
pub enum EditError {
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("stale edit on `{concept}`: expected old value {claimed}, stored value is {stored}")]
    StaleEdit {
        concept: String,
        claimed: i64,
        stored: i64,
    },
    #[error("value {value} for `{concept}` is out of range")]
    OutOfRange { concept: String, value: i64 },
    #[error("unknown segment {0:?}")]
    UnknownSegment(SegmentRef),
    #[error(transparent)]
    Model(#[from] ClassifierError),
    #[error("edit log: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditRequest {
    pub concept: String,
    pub old_value: i64,
    pub new_value: i64,
    #[serde(default = "default_editor")]
    pub editor: String,
}

fn default_editor() -> String {
    "facilitator".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptEdit {
    pub segment_ref: SegmentRef,
    pub concept: String,
    pub old_value: i64,
    pub new_value: i64,
    pub editor: String,
    pub edited_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditOutcome {
    pub edit: ConceptEdit,
    pub prob_before: f64,
    pub prob_after: f64,
    pub decision_before: u8,
    pub decision_after: u8,
    pub flipped: bool,
}

/// Applies one edit to `working`, returning the new vector and the re-prediction.
pub fn apply_edit(
    model: &CbmModel,
    schema: &ConceptSchema,
    working: &ConceptVector,
    segment_ref: SegmentRef,
    request: &EditRequest,
    now: DateTime<Utc>,
) -> Result<(ConceptVector, EditOutcome), EditError> {
    let idx = schema
        .index_of(&request.concept)
        .ok_or_else(|| EditError::UnknownConcept(request.concept.clone()))?;
    let def = &schema.concepts()[idx];
    if !def.contains(request.new_value) {
        return Err(EditError::OutOfRange {
            concept: request.concept.clone(),
            value: request.new_value,
        });
    }
    let stored = working.values[idx];
    if stored != request.old_value {
        return Err(EditError::StaleEdit {
            concept: request.concept.clone(),
            claimed: request.old_value,
            stored,
        });
    }
    let prob_before = model.predict_proba(working)?;
    let mut next = working.clone();
    next.values[idx] = request.new_value;
    let prob_after = model.predict_proba(&next)?;
    let decision_before = model.decide_proba(prob_before);
    let decision_after = model.decide_proba(prob_after);
    let outcome = EditOutcome {
        edit: ConceptEdit {
            segment_ref,
            concept: request.concept.clone(),
            old_value: request.old_value,
            new_value: request.new_value,
            editor: request.editor.clone(),
            edited_at: now,
        },
        prob_before,
        prob_after,
        decision_before,
        decision_after,
        flipped: decision_before != decision_after,
    };
    Ok((next, outcome))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfRow {
    pub value: i64,
    pub probability: f64,
    pub decision: u8,
}

/// Re-predicts over candidate values of one concept, all others fixed.
///
/// Bounded concepts try every in-range value; counts try the current value
/// and current ±1, ±2, ±5 clipped at the lower bound.
pub fn what_if(
    model: &CbmModel,
    schema: &ConceptSchema,
    vector: &ConceptVector,
    concept: &str,
) -> Result<Vec<WhatIfRow>, EditError> {
    let idx = schema
        .index_of(concept)
        .ok_or_else(|| EditError::UnknownConcept(concept.to_string()))?;
    let def = &schema.concepts()[idx];
    let candidates: Vec<i64> = match (def.kind, def.max) {
        (ConceptKind::NumericCount, _) | (_, None) => {
            let cur = vector.values[idx];
            let mut c: Vec<i64> = [-5, -2, -1, 0, 1, 2, 5]
                .iter()
                .map(|d| (cur + d).max(def.min))
                .collect();
            c.sort_unstable();
            c.dedup();
            c
        }
        (_, Some(max)) => (def.min..=max).collect(),
    };
    let mut probe = vector.clone();
    candidates
        .into_iter()
        .map(|value| {
            probe.values[idx] = value;
            let probability = model.predict_proba(&probe)?;
            Ok(WhatIfRow {
                value,
                probability,
                decision: model.decide_proba(probability),
            })
        })
        .collect()
}

/// Replays an edit chain over an original extraction.
pub fn replay_edits(schema: &ConceptSchema, original: &ConceptVector, edits: &[EditOutcome]) -> ConceptVector {
    let mut v = original.clone();
    for e in edits {
        if let Some(idx) = schema.index_of(&e.edit.concept) {
            v.values[idx] = e.edit.new_value;
        }
    }
    v
}

#[derive(Debug, Clone)]
struct SegmentEdits {
    original: ConceptVector,
    working: ConceptVector,
    history: Vec<EditOutcome>,
}

/// Append-only edit log with per-segment working vectors.
///
/// The log file is the source of truth; the in-memory state is rebuilt from it
/// when the journal is reopened.
#[derive(Debug)]
pub struct EditJournal {
    path: PathBuf,
    schema: ConceptSchema,
    segments: BTreeMap<SegmentRef, SegmentEdits>,
}

impl EditJournal {
    /// Opens (or creates) the log and replays it over the given originals.
    pub fn open(
        path: impl Into<PathBuf>,
        schema: ConceptSchema,
        originals: impl IntoIterator<Item = (SegmentRef, ConceptVector)>,
    ) -> Result<Self, EditError> {
        let path = path.into();
        let mut journal = Self {
            path,
            schema,
            segments: BTreeMap::new(),
        };
        for (r, v) in originals {
            journal.register(r, v);
        }
        jsonl::truncate_torn_tail(&journal.path)?;
        for outcome in jsonl::read_all::<EditOutcome>(&journal.path)? {
            let seg = journal
                .segments
                .get_mut(&outcome.edit.segment_ref)
                .ok_or_else(|| EditError::UnknownSegment(outcome.edit.segment_ref.clone()))?;
            let idx = journal
                .schema
                .index_of(&outcome.edit.concept)
                .ok_or_else(|| EditError::UnknownConcept(outcome.edit.concept.clone()))?;
            if seg.working.values[idx] != outcome.edit.old_value {
                return Err(EditError::StaleEdit {
                    concept: outcome.edit.concept.clone(),
                    claimed: outcome.edit.old_value,
                    stored: seg.working.values[idx],
                });
            }
            seg.working.values[idx] = outcome.edit.new_value;
            seg.history.push(outcome);
        }
        Ok(journal)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Makes a segment editable. Re-registering keeps existing history.
    pub fn register(&mut self, segment: SegmentRef, original: ConceptVector) {
        self.segments.entry(segment).or_insert_with(|| SegmentEdits {
            working: original.clone(),
            original,
            history: Vec::new(),
        });
    }

    pub fn working(&self, segment: &SegmentRef) -> Option<&ConceptVector> {
        self.segments.get(segment).map(|s| &s.working)
    }

    pub fn original(&self, segment: &SegmentRef) -> Option<&ConceptVector> {
        self.segments.get(segment).map(|s| &s.original)
    }

    /// Validates, persists, then applies an edit.
    pub fn apply(
        &mut self,
        model: &CbmModel,
        segment: &SegmentRef,
        request: &EditRequest,
        now: DateTime<Utc>,
    ) -> Result<EditOutcome, EditError> {
        let seg = self
            .segments
            .get_mut(segment)
            .ok_or_else(|| EditError::UnknownSegment(segment.clone()))?;
        let (next, outcome) = apply_edit(model, &self.schema, &seg.working, segment.clone(), request, now)?;
        jsonl::append(&self.path, &outcome)?;
        seg.working = next;
        seg.history.push(outcome.clone());
        Ok(outcome)
    }

    pub fn edit_history(&self, segment: &SegmentRef) -> Result<&[EditOutcome], EditError> {
        self.segments
            .get(segment)
            .map(|s| s.history.as_slice())
            .ok_or_else(|| EditError::UnknownSegment(segment.clone()))
    }

    /// Working vectors of every segment that has at least one edit.
    pub fn corrected_vectors(&self) -> impl Iterator<Item = (&SegmentRef, &ConceptVector)> {
        self.segments
            .iter()
            .filter(|(_, s)| !s.history.is_empty())
            .map(|(r, s)| (r, &s.working))
    }
}
