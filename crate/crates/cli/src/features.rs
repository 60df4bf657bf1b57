//! `features.jsonl`: one extracted concept vector per labeled segment.

use std::collections::BTreeMap;
use std::path::Path;

use cofac_core::jsonl;
use cofac_core::schema::{ConceptSchema, ConceptVector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, UserContext};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub segment_id: String,
    pub session_id: String,
    pub t0: f64,
    pub t1: f64,
    pub label: u8,
    pub schema_version: String,
    pub concepts: BTreeMap<String, i64>,
    #[serde(default)]
    pub warnings: usize,
}

impl FeatureRow {
    pub fn vector(&self, schema: &ConceptSchema) -> CliResult<ConceptVector> {
        if self.schema_version != schema.version() {
            return Err(CliError::User(format!(
                "row {} was extracted with schema `{}`, expected `{}`",
                self.segment_id,
                self.schema_version,
                schema.version()
            )));
        }
        schema.validate_vector(&self.concepts).user(&self.segment_id)
    }
}

pub fn read_rows(path: &Path) -> CliResult<Vec<FeatureRow>> {
    if !path.is_file() {
        return Err(CliError::User(format!("features file {} not found", path.display())));
    }
    jsonl::read_all(path).user(path.display())
}

/// Raw feature rows and labels for training.
pub fn training_samples(path: &Path, schema: &ConceptSchema) -> CliResult<Vec<(Vec<f64>, u8)>> {
    read_rows(path)?
        .iter()
        .map(|r| Ok((r.vector(schema)?.to_feature_row(), r.label)))
        .collect()
}
