//! Wire and storage types.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use cofac_core::advisor::StageGoals;
use cofac_core::dataset::{Segment, Utterance};
use cofac_core::editing::EditOutcome;
use cofac_core::extractor::ExtractionResult;
use cofac_core::schema::ConceptVector;
use cofac_core::{MeetingSummary, SegmentRef, Suggestion};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Closed,
}

/// Contents of `session.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: String,
    pub stage_goals: StageGoals,
    pub model_ref: String,
    pub status: SessionStatus,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Text,
    Speech,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub suggestion_ref: SegmentRef,
    pub text_payload: String,
    pub speech_payload: String,
    pub delivered_via: BTreeSet<Channel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AckState {
    Acknowledged,
    Dismissed,
}

/// One analysed segment.
///
/// `extraction`, `probability` and `decision` are the machine results at
/// ingest time and never change. `current_*` reflect the edit chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentAnalysis {
    pub index: usize,
    pub segment: Segment,
    pub extraction: ExtractionResult,
    pub probability: f64,
    pub decision: u8,
    pub suggestion: Option<Suggestion>,
    pub notification: Option<Notification>,
    #[serde(default)]
    pub advice_warnings: Vec<String>,
    /// Pipeline stages that failed, e.g. `advisor_unavailable`.
    #[serde(default)]
    pub degraded: Vec<String>,
    #[serde(default)]
    pub edits: Vec<EditOutcome>,
    pub current_vector: ConceptVector,
    pub current_probability: f64,
    pub current_decision: u8,
    #[serde(default)]
    pub ack: Option<AckState>,
    pub analyzed_at: DateTime<Utc>,
}

/// Later changes to a segment's suggestion state, kept in `notes.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "note", rename_all = "snake_case")]
pub enum SegmentNote {
    Suggestion {
        index: usize,
        suggestion: Box<Suggestion>,
        notification: Notification,
        #[serde(default)]
        warnings: Vec<String>,
    },
    Ack {
        index: usize,
        state: AckState,
        at: DateTime<Utc>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "snake_case")]
pub enum EventBody {
    SegmentAnalyzed(Box<SegmentAnalysis>),
    SuggestionCreated {
        segment_index: usize,
        suggestion: Suggestion,
        notification: Notification,
    },
    SummaryUpdated(MeetingSummary),
    EditApplied {
        segment_index: usize,
        outcome: EditOutcome,
        analysis: Box<SegmentAnalysis>,
    },
    SuggestionAcknowledged {
        segment_index: usize,
        state: AckState,
    },
    SessionClosed,
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::SegmentAnalyzed(_) => "segment_analyzed",
            EventBody::SuggestionCreated { .. } => "suggestion_created",
            EventBody::SummaryUpdated(_) => "summary_updated",
            EventBody::EditApplied { .. } => "edit_applied",
            EventBody::SuggestionAcknowledged { .. } => "suggestion_acknowledged",
            EventBody::SessionClosed => "session_closed",
        }
    }
}

/// A pushed event; `seq` starts at 1 and is gapless per session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub session_id: String,
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub stage_goals: StageGoals,
    pub model_ref: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSegment {
    pub t0: f64,
    pub t1: f64,
    pub utterances: Vec<Utterance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditBody {
    pub concept: String,
    pub old_value: i64,
    pub new_value: i64,
    #[serde(default)]
    pub editor: Option<String>,
    /// Run the advisor when the edit turns the decision on and no suggestion exists yet.
    #[serde(default)]
    pub request_advice: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditResponse {
    #[serde(flatten)]
    pub outcome: EditOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suggestion: Option<Suggestion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AckBody {
    pub state: AckState,
}

/// Session header for clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    #[serde(flatten)]
    pub meta: SessionMeta,
    pub segments: usize,
    pub last_seq: u64,
}
