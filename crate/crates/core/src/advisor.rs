//! Structured intervention suggestions, generated only when the classifier fires.

use std::fmt;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{first_json_object, section, BackendError, CompletionRequest, LanguageBackend, Task};
use crate::dataset::Segment;
use crate::schema::{ConceptSchema, ConceptVector};
use crate::summary::MeetingSummary;

pub const MAX_ACTION_CHARS: usize = 140;

#[derive(Debug, Error, PartialEq)]
pub enum AdvisorError {
    #[error("advisor backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("advisor reply could not be parsed: {0}")]
    UnparseableResponse(String),
    #[error("few-shot file: {0}")]
    MalformedExample(String),
    #[error("invalid stage goals: {0}")]
    InvalidGoals(String),
}

impl From<BackendError> for AdvisorError {
    fn from(e: BackendError) -> Self {
        AdvisorError::BackendUnavailable(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageGoals {
    pub session_number: u8,
    pub goals: Vec<String>,
    #[serde(default)]
    pub agenda: Vec<String>,
}

impl StageGoals {
    pub fn validate(&self) -> Result<(), AdvisorError> {
        if !(1..=3).contains(&self.session_number) {
            return Err(AdvisorError::InvalidGoals(format!(
                "session_number {} not in 1..=3",
                self.session_number
            )));
        }
        if self.goals.iter().all(|g| g.trim().is_empty()) {
            return Err(AdvisorError::InvalidGoals("goals are empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub transcript_excerpt: String,
    pub recommended_action: String,
    pub rationale: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Goal,
    Redirect,
    Support,
    Other,
}

impl Category {
    /// Maps free text onto the closed set; `None` when nothing fits.
    pub fn parse(text: &str) -> Option<Self> {
        let t = text.trim().to_ascii_lowercase();
        if t.contains("redirect") {
            Some(Category::Redirect)
        } else if t.contains("support") {
            Some(Category::Support)
        } else if t.contains("goal") {
            Some(Category::Goal)
        } else if t == "other" {
            Some(Category::Other)
        } else {
            None
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Goal => "goal",
            Category::Redirect => "redirect",
            Category::Support => "support",
            Category::Other => "other",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SegmentRef {
    pub session_id: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub category: Category,
    pub action: String,
    pub rationale: String,
    pub segment_ref: SegmentRef,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Advice {
    pub suggestion: Suggestion,
    pub warnings: Vec<String>,
}

/// Reads a few-shot file (JSON array). An empty array is allowed.
pub fn load_fewshot(path: &Path) -> Result<Vec<FewShotExample>, AdvisorError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AdvisorError::MalformedExample(format!("{}: {e}", path.display())))?;
    parse_fewshot(&text)
}

pub fn parse_fewshot(text: &str) -> Result<Vec<FewShotExample>, AdvisorError> {
    let examples: Vec<FewShotExample> =
        serde_json::from_str(text).map_err(|e| AdvisorError::MalformedExample(e.to_string()))?;
    for (i, ex) in examples.iter().enumerate() {
        for (field, value) in [
            ("transcript_excerpt", &ex.transcript_excerpt),
            ("recommended_action", &ex.recommended_action),
            ("rationale", &ex.rationale),
        ] {
            if value.trim().is_empty() {
                return Err(AdvisorError::MalformedExample(format!("example {i}: `{field}` is empty")));
            }
        }
    }
    if examples.is_empty() {
        tracing::warn!("few-shot file is empty; the advisor will run zero-shot");
    }
    Ok(examples)
}

const SYSTEM_PROMPT: &str = "You are the Intervention Advisor, assisting a human facilitator of an online \
support-group meeting. The facilitator always decides; you suggest one concrete next move.";

pub fn advice_prompt(
    summary: &MeetingSummary,
    goals: &StageGoals,
    segment: &Segment,
    concepts: &ConceptVector,
    schema: &ConceptSchema,
    fewshot: &[FewShotExample],
) -> String {
    let concept_lines = schema
        .named_values(concepts)
        .into_iter()
        .filter(|(_, v)| *v != 0)
        .map(|(k, v)| format!("- {k}: {v}"))
        .collect::<Vec<_>>()
        .join("\n");
    let goal_lines = format!(
        "Session {}\nGoals:\n{}\nAgenda:\n{}",
        goals.session_number,
        goals.goals.iter().map(|g| format!("- {g}")).collect::<Vec<_>>().join("\n"),
        goals
            .agenda
            .iter()
            .enumerate()
            .map(|(i, a)| format!("{}. {a}", i + 1))
            .collect::<Vec<_>>()
            .join("\n"),
    );
    let examples = fewshot
        .iter()
        .map(|e| {
            format!(
                "Transcript: {}\nRecommended action: {}\nRationale: {}",
                e.transcript_excerpt, e.recommended_action, e.rationale
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n");
    format!(
        "An intervention is needed now. Recommend one action for the facilitator.\n\n{}\n\n{}\n\n{}\n\n{}\n\n{}\n\n\
         Output grammar: one JSON object {{\"category\": one of \"goal\" | \"redirect\" | \"support\" | \"other\", \
         \"action\": short imperative sentence of at most {MAX_ACTION_CHARS} characters, \
         \"rationale\": why this action is needed at this moment}}.",
        section("meeting_summary", &summary.text),
        section("stage_goals", &goal_lines),
        section("observed_concepts", &concept_lines),
        section("examples", &examples),
        section("transcript", &segment.text()),
    )
}

fn parse_advice(raw: &str) -> Result<(Category, String, String, Vec<String>), String> {
    let obj = first_json_object(raw).ok_or("no JSON object")?;
    let field = |k: &str| obj.get(k).and_then(|v| v.as_str()).map(|s| s.trim().to_string());
    let action = field("action").filter(|a| !a.is_empty()).ok_or("missing action")?;
    let rationale = field("rationale").unwrap_or_default();
    let mut warnings = Vec::new();
    let raw_category = field("category").unwrap_or_default();
    let category = Category::parse(&raw_category).unwrap_or_else(|| {
        warnings.push(format!("category `{raw_category}` coerced to other"));
        Category::Other
    });
    let action = if action.chars().count() > MAX_ACTION_CHARS {
        warnings.push(format!("action truncated to {MAX_ACTION_CHARS} characters"));
        action.chars().take(MAX_ACTION_CHARS).collect()
    } else {
        action
    };
    Ok((category, action, rationale, warnings))
}

#[allow(clippy::too_many_arguments)]
pub fn suggest(
    summary: &MeetingSummary,
    goals: &StageGoals,
    segment: &Segment,
    segment_ref: SegmentRef,
    concepts: &ConceptVector,
    schema: &ConceptSchema,
    fewshot: &[FewShotExample],
    backend: &dyn LanguageBackend,
    now: DateTime<Utc>,
) -> Result<Advice, AdvisorError> {
    let mut warnings = Vec::new();
    if fewshot.is_empty() {
        warnings.push("no few-shot examples; zero-shot advice".to_string());
    }
    let mut request = CompletionRequest {
        task: Task::Advice,
        system: SYSTEM_PROMPT.into(),
        prompt: advice_prompt(summary, goals, segment, concepts, schema, fewshot),
        seed: None,
    };
    let raw = backend.complete(&request)?;
    let parsed = match parse_advice(&raw) {
        Ok(p) => p,
        Err(reason) => {
            tracing::warn!(session = %segment_ref.session_id, index = segment_ref.index, %reason, "unparseable advice, re-asking once");
            request.prompt = format!(
                "{}\n\nYour previous reply was not valid ({reason}):\n{}\nReply again with only the JSON object.",
                request.prompt,
                section("previous_reply", &raw)
            );
            let second = backend.complete(&request)?;
            parse_advice(&second).map_err(AdvisorError::UnparseableResponse)?
        }
    };
    let (category, action, rationale, parse_warnings) = parsed;
    warnings.extend(parse_warnings);
    Ok(Advice {
        suggestion: Suggestion {
            category,
            action,
            rationale,
            segment_ref,
            created_at: now,
        },
        warnings,
    })
}

/// Speakable one-liner for the voice channel.
pub fn speech_text(s: &Suggestion) -> String {
    let lead = match s.category {
        Category::Goal => "Goal suggestion",
        Category::Redirect => "Redirect suggestion",
        Category::Support => "Support suggestion",
        Category::Other => "Suggestion",
    };
    let action = s.action.trim_end_matches(['.', '!', ' ']);
    format!("{lead}: {action}.")
}
