use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use cofac_core::editing::EditError;
use serde_json::json;
use thiserror::Error;

use crate::model::SegmentAnalysis;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("session has no segment {0}")]
    UnknownSegment(usize),
    #[error("invalid stage goals: {0}")]
    InvalidGoals(String),
    #[error("invalid request body: {0}")]
    InvalidBody(String),
    #[error("invalid segment: {0}")]
    InvalidSegment(String),
    #[error("segment starts at {got}s, expected {expected}s (±1 s)")]
    OutOfOrder { expected: f64, got: f64 },
    #[error("session is closed")]
    SessionClosed,
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    /// The analysis was stored but the advisor failed.
    #[error("advisor unavailable: {reason}")]
    AdvisorUnavailable {
        reason: String,
        analysis: Box<SegmentAnalysis>,
    },
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("value {value} for `{concept}` is out of range")]
    OutOfRange { concept: String, value: i64 },
    #[error("stale edit on `{concept}`: stored value is {stored}, request claimed {claimed}")]
    StaleEdit { concept: String, claimed: i64, stored: i64 },
    #[error("segment {0} has no suggestion")]
    NoSuggestion(usize),
    #[error("missing or wrong api key")]
    Unauthorized,
    #[error("storage: {0}")]
    Storage(#[from] std::io::Error),
    #[error("internal: {0}")]
    Internal(String),
}

impl From<EditError> for ServiceError {
    fn from(e: EditError) -> Self {
        match e {
            EditError::UnknownConcept(c) => ServiceError::UnknownConcept(c),
            EditError::StaleEdit {
                concept,
                claimed,
                stored,
            } => ServiceError::StaleEdit {
                concept,
                claimed,
                stored,
            },
            EditError::OutOfRange { concept, value } => ServiceError::OutOfRange { concept, value },
            EditError::UnknownSegment(r) => ServiceError::UnknownSegment(r.index),
            EditError::Io(e) => ServiceError::Storage(e),
            EditError::Model(e) => ServiceError::Internal(e.to_string()),
        }
    }
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        use ServiceError::*;
        match self {
            UnknownSession(_) | UnknownModel(_) | UnknownSegment(_) | NoSuggestion(_) => StatusCode::NOT_FOUND,
            InvalidGoals(_) | InvalidBody(_) | InvalidSegment(_) | UnknownConcept(_) | OutOfRange { .. } => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            OutOfOrder { .. } | StaleEdit { .. } => StatusCode::CONFLICT,
            SessionClosed => StatusCode::GONE,
            BackendUnavailable(_) | AdvisorUnavailable { .. } => StatusCode::BAD_GATEWAY,
            Unauthorized => StatusCode::UNAUTHORIZED,
            Storage(_) | Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        use ServiceError::*;
        match self {
            UnknownSession(_) => "unknown_session",
            UnknownModel(_) => "unknown_model",
            UnknownSegment(_) => "unknown_segment",
            InvalidGoals(_) => "invalid_goals",
            InvalidBody(_) => "invalid_body",
            InvalidSegment(_) => "invalid_segment",
            OutOfOrder { .. } => "out_of_order_segment",
            SessionClosed => "session_closed",
            BackendUnavailable(_) => "backend_unavailable",
            AdvisorUnavailable { .. } => "advisor_unavailable",
            UnknownConcept(_) => "unknown_concept",
            OutOfRange { .. } => "out_of_range",
            StaleEdit { .. } => "stale_edit",
            NoSuggestion(_) => "no_suggestion",
            Unauthorized => "unauthorized",
            Storage(_) => "storage",
            Internal(_) => "internal",
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() && status != StatusCode::BAD_GATEWAY {
            tracing::error!(error = %self, "request failed");
        }
        let mut body = json!({ "error": self.code(), "message": self.to_string() });
        match &self {
            ServiceError::AdvisorUnavailable { analysis, .. } => {
                body["analysis"] = serde_json::to_value(analysis).unwrap_or_default();
            }
            ServiceError::StaleEdit { stored, .. } => body["stored_value"] = json!(stored),
            _ => {}
        }
        (status, Json(body)).into_response()
    }
}
