//! Rolling meeting summary maintained by the context integrator.
//!
//! Each segment is folded into the previous summary through the backend. A
//! failing backend never stops a session: the old text is kept, the segment
//! index still advances and the summary is marked stale.

use serde::{Deserialize, Serialize};

use crate::backend::{first_json_object, section, CompletionRequest, LanguageBackend, Task};
use crate::dataset::Segment;
use crate::schema::{ConceptSchema, ConceptVector};

pub const DEFAULT_BUDGET_CHARS: usize = 2000;
pub const TRUNCATION_MARKER: &str = " [...]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeetingSummary {
    pub session_id: String,
    /// Index of the last folded segment; `None` before the first update.
    pub as_of_segment: Option<usize>,
    pub text: String,
    pub salient_flags: Vec<String>,
    /// First segment whose update failed since the last successful one.
    #[serde(default)]
    pub stale_since: Option<usize>,
}

impl MeetingSummary {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            as_of_segment: None,
            text: String::new(),
            salient_flags: Vec::new(),
            stale_since: None,
        }
    }

    pub fn next_segment(&self) -> usize {
        self.as_of_segment.map_or(0, |i| i + 1)
    }

    pub fn is_stale(&self) -> bool {
        self.stale_since.is_some()
    }
}

/// Caps `text` at `budget` characters, ending with a marker when cut.
pub fn truncate_to_budget(text: &str, budget: usize) -> String {
    if text.chars().count() <= budget {
        return text.to_string();
    }
    let keep = budget.saturating_sub(TRUNCATION_MARKER.chars().count());
    let mut out: String = text.chars().take(keep).collect();
    out.push_str(TRUNCATION_MARKER);
    out.chars().take(budget).collect()
}

const SYSTEM_PROMPT: &str = "You are the Context Integrator for a facilitated support-group meeting. \
You maintain a concise cumulative summary of the meeting's dynamics.";

pub fn summary_prompt(prev: &MeetingSummary, segment: &Segment, concepts: &ConceptVector, schema: &ConceptSchema, budget: usize) -> String {
    let observed = schema
        .named_values(concepts)
        .into_iter()
        .filter(|(_, v)| *v != 0)
        .map(|(k, v)| format!("- {k}: {v}"))
        .collect::<Vec<_>>()
        .join("\n");
    format!(
        "Update the cumulative meeting summary with the newest segment. Keep it under {budget} characters. \
         Reply either with the summary text, or with a JSON object {{\"summary\": str, \"salient_flags\": [str]}} \
         listing open issues to carry forward.\n\n{}\n\n{}\n\n{}\n\n{}",
        section("previous_summary", &prev.text),
        section("open_issues", &prev.salient_flags.join("\n")),
        section("observed_concepts", &observed),
        section("transcript", &segment.text()),
    )
}

/// Folds one segment into the summary. Never fails; see the module docs.
pub fn update_summary(
    prev: &MeetingSummary,
    segment_index: usize,
    segment: &Segment,
    concepts: &ConceptVector,
    schema: &ConceptSchema,
    backend: &dyn LanguageBackend,
    budget: usize,
) -> MeetingSummary {
    debug_assert_eq!(prev.next_segment(), segment_index, "summary updates must be sequential");
    let mut next = prev.clone();
    next.as_of_segment = Some(segment_index);

    let nothing_new = segment.is_empty() && concepts.values.iter().all(|&v| v == 0);
    if nothing_new {
        return next;
    }
    let request = CompletionRequest {
        task: Task::Summary,
        system: SYSTEM_PROMPT.into(),
        prompt: summary_prompt(prev, segment, concepts, schema, budget),
        seed: None,
    };
    match backend.complete(&request) {
        Ok(reply) => {
            let (text, flags) = parse_reply(&reply);
            next.text = truncate_to_budget(text.trim(), budget);
            if let Some(flags) = flags {
                next.salient_flags = flags;
            }
            next.stale_since = None;
        }
        Err(e) => {
            tracing::warn!(session = %prev.session_id, segment_index, error = %e, "summary update failed, keeping previous summary");
            next.stale_since = prev.stale_since.or(Some(segment_index));
        }
    }
    next
}

fn parse_reply(reply: &str) -> (String, Option<Vec<String>>) {
    let trimmed = reply.trim();
    if trimmed.starts_with('{') {
        if let Some(obj) = first_json_object(trimmed) {
            if let Some(text) = obj.get("summary").and_then(|v| v.as_str()) {
                let flags = obj.get("salient_flags").and_then(|v| v.as_array()).map(|a| {
                    a.iter()
                        .filter_map(|f| f.as_str().map(str::to_string))
                        .collect()
                });
                return (text.to_string(), flags);
            }
        }
    }
    (trimmed.to_string(), None)
}
