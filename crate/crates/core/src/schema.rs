//! Concept vocabulary and the canonical numeric encoding of concept vectors.
//!
//! A [`ConceptSchema`] fixes the order of concepts: feature index `i` always
//! refers to `concepts[i]`. Everything downstream (extraction, the classifier,
//! editing) addresses concepts through that order.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound of every ordinal concept scale.
pub const ORDINAL_MAX: i64 = 5;

#[derive(Debug, Error, PartialEq)]
pub enum SchemaError {
    #[error("schema has no concepts")]
    Empty,
    #[error("concept name is empty (position {0})")]
    EmptyName(usize),
    #[error("duplicate concept name `{0}`")]
    DuplicateName(String),
    #[error("concept `{name}` has invalid range [{min}, {max:?}]")]
    InvalidRange {
        name: String,
        min: i64,
        max: Option<i64>,
    },
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("value {value} for concept `{name}` is outside [{min}, {max}]")]
    OutOfRange {
        name: String,
        value: i64,
        min: i64,
        max: String,
    },
    #[error("vector has {got} values but schema `{version}` has {expected} concepts")]
    LengthMismatch {
        version: String,
        expected: usize,
        got: usize,
    },
    #[error("vector schema version `{got}` does not match schema `{expected}`")]
    VersionMismatch { expected: String, got: String },
    #[error("schema file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConceptKind {
    Binary,
    NumericCount,
    Ordinal,
}

impl ConceptKind {
    /// Default inclusive range for the kind. `None` as upper bound means unbounded.
    pub fn default_range(self) -> (i64, Option<i64>) {
        match self {
            ConceptKind::Binary => (0, Some(1)),
            ConceptKind::Ordinal => (0, Some(ORDINAL_MAX)),
            ConceptKind::NumericCount => (0, None),
        }
    }
}

impl fmt::Display for ConceptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConceptKind::Binary => "binary",
            ConceptKind::NumericCount => "numeric_count",
            ConceptKind::Ordinal => "ordinal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptDef {
    pub name: String,
    pub kind: ConceptKind,
    pub min: i64,
    /// Inclusive upper bound; `None` for unbounded counts.
    #[serde(default)]
    pub max: Option<i64>,
    #[serde(default)]
    pub description: String,
}

impl ConceptDef {
    pub fn new(name: impl Into<String>, kind: ConceptKind, description: impl Into<String>) -> Self {
        let (min, max) = kind.default_range();
        Self {
            name: name.into(),
            kind,
            min,
            max,
            description: description.into(),
        }
    }

    pub fn contains(&self, value: i64) -> bool {
        value >= self.min && self.max.is_none_or(|max| value <= max)
    }

    /// Nearest in-range value.
    pub fn clamp(&self, value: i64) -> i64 {
        let v = value.max(self.min);
        match self.max {
            Some(max) => v.min(max),
            None => v,
        }
    }

    fn out_of_range(&self, value: i64) -> SchemaError {
        SchemaError::OutOfRange {
            name: self.name.clone(),
            value,
            min: self.min,
            max: self.max.map_or_else(|| "+inf".to_string(), |m| m.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConceptSchema {
    version: String,
    concepts: Vec<ConceptDef>,
}

#[derive(Deserialize)]
struct RawSchema {
    version: String,
    concepts: Vec<ConceptDef>,
}

impl<'de> Deserialize<'de> for ConceptSchema {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawSchema::deserialize(deserializer)?;
        ConceptSchema::new(raw.version, raw.concepts).map_err(serde::de::Error::custom)
    }
}

impl ConceptSchema {
    pub fn new(version: impl Into<String>, concepts: Vec<ConceptDef>) -> Result<Self, SchemaError> {
        if concepts.is_empty() {
            return Err(SchemaError::Empty);
        }
        let mut seen = HashSet::new();
        for (i, c) in concepts.iter().enumerate() {
            if c.name.trim().is_empty() {
                return Err(SchemaError::EmptyName(i));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(SchemaError::DuplicateName(c.name.clone()));
            }
            if c.max.is_some_and(|max| max < c.min) {
                return Err(SchemaError::InvalidRange {
                    name: c.name.clone(),
                    min: c.min,
                    max: c.max,
                });
            }
        }
        Ok(Self {
            version: version.into(),
            concepts,
        })
    }

    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SchemaError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| SchemaError::Io(format!("{}: {e}", path.display())))
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn concepts(&self) -> &[ConceptDef] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.concepts.iter().position(|c| c.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&ConceptDef> {
        self.concepts.iter().find(|c| c.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.concepts.iter().map(|c| c.name.as_str())
    }

    pub fn zero_vector(&self) -> ConceptVector {
        ConceptVector {
            schema_version: self.version.clone(),
            values: self.concepts.iter().map(|c| c.clamp(0)).collect(),
        }
    }

    /// Builds a canonical-order vector from a name → value map.
    ///
    /// Missing concepts default to 0. Out-of-range values are rejected, not clamped.
    pub fn validate_vector(&self, raw: &BTreeMap<String, i64>) -> Result<ConceptVector, SchemaError> {
        if let Some(unknown) = raw.keys().find(|k| self.index_of(k).is_none()) {
            return Err(SchemaError::UnknownConcept(unknown.clone()));
        }
        let values = self
            .concepts
            .iter()
            .map(|c| {
                let v = raw.get(&c.name).copied().unwrap_or(0);
                if c.contains(v) {
                    Ok(v)
                } else {
                    Err(c.out_of_range(v))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ConceptVector {
            schema_version: self.version.clone(),
            values,
        })
    }

    /// Checks a vector produced elsewhere (deserialized, edited) against this schema.
    pub fn check(&self, v: &ConceptVector) -> Result<(), SchemaError> {
        if v.schema_version != self.version {
            return Err(SchemaError::VersionMismatch {
                expected: self.version.clone(),
                got: v.schema_version.clone(),
            });
        }
        if v.values.len() != self.concepts.len() {
            return Err(SchemaError::LengthMismatch {
                version: self.version.clone(),
                expected: self.concepts.len(),
                got: v.values.len(),
            });
        }
        for (c, &value) in self.concepts.iter().zip(&v.values) {
            if !c.contains(value) {
                return Err(c.out_of_range(value));
            }
        }
        Ok(())
    }

    /// Name → value view of a vector, in canonical order.
    pub fn named_values(&self, v: &ConceptVector) -> BTreeMap<String, i64> {
        self.concepts
            .iter()
            .zip(&v.values)
            .map(|(c, &value)| (c.name.clone(), value))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptVector {
    pub schema_version: String,
    pub values: Vec<i64>,
}

impl ConceptVector {
    /// Integer values cast to reals in canonical order. No scaling.
    pub fn to_feature_row(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }
}

/// Built-in schema: every concept named in the published analysis, plus
/// engagement, interaction and sentiment as optional ordinal scales.
pub fn default_schema() -> ConceptSchema {
    use ConceptKind::*;
    let concepts = vec![
        ConceptDef::new(
            "Privacy Issue",
            Binary,
            "1 if another adult is present in a participant's space or privacy is otherwise compromised.",
        ),
        ConceptDef::new(
            "Missed Session Question",
            Binary,
            "1 if someone asks about or refers to a session a participant missed.",
        ),
        ConceptDef::new("Sad", Ordinal, "Intensity of expressed sadness, 0 (none) to 5 (strong)."),
        ConceptDef::new("Afraid", Ordinal, "Intensity of expressed fear or worry, 0 to 5."),
        ConceptDef::new("Admiration", Ordinal, "Intensity of praise or admiration between participants, 0 to 5."),
        ConceptDef::new("Passive", Ordinal, "How passive or withdrawn participants are, 0 to 5."),
        ConceptDef::new(
            "Deny Changes",
            Ordinal,
            "How strongly a participant denies the need for or possibility of change, 0 to 5.",
        ),
        ConceptDef::new(
            "Goal Barrier Discussion Scale",
            Ordinal,
            "Depth of discussion about barriers to reaching goals, 0 to 5.",
        ),
        ConceptDef::new(
            "Goal Difficulty Scale",
            Ordinal,
            "Perceived difficulty of the goals under discussion, 0 to 5.",
        ),
        ConceptDef::new(
            "Goal Peer Support Question",
            Binary,
            "1 if a participant asks peers for support or ideas on a goal.",
        ),
        ConceptDef::new(
            "Goal Refine Count",
            NumericCount,
            "Number of times a goal is refined or made more specific.",
        ),
        ConceptDef::new("Engagement", Ordinal, "Overall participant engagement, 0 to 5."),
        ConceptDef::new("Interaction", Ordinal, "Amount of participant-to-participant interaction, 0 to 5."),
        ConceptDef::new("Sentiment", Ordinal, "Overall positivity of tone, 0 (negative) to 5 (positive)."),
    ];
    ConceptSchema::new("default-v1", concepts).expect("built-in schema is valid")
}
