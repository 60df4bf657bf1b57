//! Segment → concept vector through a language-model backend.
//!
//! The boundary is lenient: unknown keys are dropped, missing keys default to
//! 0 and out-of-range values are clamped, each with a warning. The vector that
//! comes out always passes strict schema validation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::backend::{first_json_object, section, BackendError, CompletionRequest, LanguageBackend, Task};
use crate::dataset::Segment;
use crate::schema::{ConceptKind, ConceptSchema, ConceptVector};

#[derive(Debug, Error, PartialEq)]
pub enum ExtractError {
    #[error("extraction backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("no JSON object in backend reply")]
    UnparseableResponse,
}

impl From<BackendError> for ExtractError {
    fn from(e: BackendError) -> Self {
        ExtractError::BackendUnavailable(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum WarningIssue {
    UnknownKey,
    Defaulted,
    Clamped { from: i64, to: i64 },
    Coerced { from: String },
    Invalid { value: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionWarning {
    pub concept: String,
    #[serde(flatten)]
    pub issue: WarningIssue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub vector: ConceptVector,
    /// Backend reply kept for audit; empty when no call was made.
    pub raw_response: String,
    pub warnings: Vec<ExtractionWarning>,
}

const SYSTEM_PROMPT: &str = "You are a Concept Extractor for a facilitated support-group meeting. \
You read one 60-second transcript segment and score a fixed set of interpretable concepts. \
Reply with a single JSON object and nothing else.";

pub fn extraction_prompt(segment: &Segment, schema: &ConceptSchema) -> String {
    let concepts = schema
        .concepts()
        .iter()
        .map(|c| {
            let range = match (c.kind, c.max) {
                (ConceptKind::Binary, _) => "0 or 1".to_string(),
                (_, Some(max)) => format!("integer {}..{}", c.min, max),
                (_, None) => format!("integer >= {}", c.min),
            };
            format!("- \"{}\" ({}, {}): {}", c.name, c.kind, range, c.description)
        })
        .collect::<Vec<_>>()
        .join("\n");
    format!(
        "Score every concept below for the transcript segment.\n\n{}\n\n\
         Output grammar: one JSON object whose keys are exactly the concept names above \
         and whose values are integers in the stated ranges. Use 0 when a concept is not observed.\n\n{}",
        section("concepts", &concepts),
        section("transcript", &segment.text()),
    )
}

fn repair_prompt(original: &str, reply: &str) -> String {
    format!(
        "{original}\n\nYour previous reply could not be parsed as a JSON object:\n{}\n\
         Reply again with only the JSON object.",
        section("previous_reply", reply)
    )
}

pub fn extract_concepts(
    segment: &Segment,
    schema: &ConceptSchema,
    backend: &dyn LanguageBackend,
) -> Result<ExtractionResult, ExtractError> {
    if segment.is_empty() {
        return Ok(ExtractionResult {
            vector: schema.zero_vector(),
            raw_response: String::new(),
            warnings: Vec::new(),
        });
    }
    let prompt = extraction_prompt(segment, schema);
    let mut request = CompletionRequest {
        task: Task::Extraction,
        system: SYSTEM_PROMPT.into(),
        prompt,
        seed: None,
    };
    let raw = backend.complete(&request)?;
    let (raw, parsed) = match postprocess_response(&raw, schema) {
        Ok(p) => (raw, p),
        Err(ExtractError::UnparseableResponse) => {
            tracing::warn!(segment = %segment.id(), "unparseable extraction reply, re-asking once");
            request.prompt = repair_prompt(&request.prompt, &raw);
            let second = backend.complete(&request)?;
            let parsed = postprocess_response(&second, schema)?;
            (second, parsed)
        }
        Err(e) => return Err(e),
    };
    let (vector, warnings) = parsed;
    Ok(ExtractionResult {
        vector,
        raw_response: raw,
        warnings,
    })
}

fn coerce(value: &Value) -> Result<(i64, Option<String>), String> {
    match value {
        Value::Bool(b) => Ok((*b as i64, None)),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok((i, None))
            } else if let Some(f) = n.as_f64().filter(|f| f.is_finite()) {
                let r = f.round();
                let r = r.clamp(i64::MIN as f64, i64::MAX as f64) as i64;
                Ok((r, Some(n.to_string())))
            } else {
                Err(n.to_string())
            }
        }
        Value::String(s) => {
            let t = s.trim();
            match t.to_ascii_lowercase().as_str() {
                "true" | "yes" => return Ok((1, Some(s.clone()))),
                "false" | "no" => return Ok((0, Some(s.clone()))),
                _ => {}
            }
            if let Ok(i) = t.parse::<i64>() {
                Ok((i, Some(s.clone())))
            } else if let Some(f) = t.parse::<f64>().ok().filter(|f| f.is_finite()) {
                Ok((f.round() as i64, Some(s.clone())))
            } else {
                Err(value.to_string())
            }
        }
        other => Err(other.to_string()),
    }
}

/// Parses the first JSON object in `raw` into a schema-valid vector.
pub fn postprocess_response(
    raw: &str,
    schema: &ConceptSchema,
) -> Result<(ConceptVector, Vec<ExtractionWarning>), ExtractError> {
    let obj = first_json_object(raw).ok_or(ExtractError::UnparseableResponse)?;
    let mut warnings = Vec::new();
    let warn = |w: &mut Vec<ExtractionWarning>, concept: &str, issue| {
        w.push(ExtractionWarning {
            concept: concept.to_string(),
            issue,
        })
    };

    for key in obj.keys().filter(|k| schema.index_of(k).is_none()) {
        warn(&mut warnings, key, WarningIssue::UnknownKey);
    }

    let mut values = Vec::with_capacity(schema.len());
    for def in schema.concepts() {
        let v = match obj.get(&def.name) {
            None => {
                warn(&mut warnings, &def.name, WarningIssue::Defaulted);
                def.clamp(0)
            }
            Some(value) => match coerce(value) {
                Ok((v, coerced_from)) => {
                    if let Some(from) = coerced_from {
                        warn(&mut warnings, &def.name, WarningIssue::Coerced { from });
                    }
                    let clamped = def.clamp(v);
                    if clamped != v {
                        warn(&mut warnings, &def.name, WarningIssue::Clamped { from: v, to: clamped });
                    }
                    clamped
                }
                Err(text) => {
                    warn(&mut warnings, &def.name, WarningIssue::Invalid { value: text });
                    def.clamp(0)
                }
            },
        };
        values.push(v);
    }
    let vector = ConceptVector {
        schema_version: schema.version().to_string(),
        values,
    };
    debug_assert!(schema.check(&vector).is_ok());
    Ok((vector, warnings))
}

/// Name-keyed JSON rendering of a vector, the same shape the backend is asked for.
pub fn vector_to_json(schema: &ConceptSchema, v: &ConceptVector) -> String {
    let named: BTreeMap<String, i64> = schema.named_values(v);
    serde_json::to_string(&named).expect("map serializes")
}
