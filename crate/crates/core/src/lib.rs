//! Interpretable co-facilitation engine.
//!
//! Transcript segments are scored into human-readable concept vectors, an
//! elastic-net logistic regression over those concepts decides whether the
//! facilitator should intervene, and a suggestion is generated when it does.
//! Facilitators can correct any concept value and get an instant re-prediction.

pub mod advisor;
pub mod backend;
pub mod classifier;
pub mod clock;
pub mod dataset;
pub mod editing;
pub mod extractor;
pub mod fixtures;
pub mod jsonl;
pub mod schema;
pub mod summary;

pub use advisor::{Category, FewShotExample, SegmentRef, StageGoals, Suggestion};
pub use backend::{LanguageBackend, MockBackend, RuleTable};
pub use classifier::{CbmModel, Hyperparams};
pub use dataset::{Segment, Utterance};
pub use editing::{EditOutcome, EditRequest};
pub use schema::{default_schema, ConceptSchema, ConceptVector};
pub use summary::MeetingSummary;
