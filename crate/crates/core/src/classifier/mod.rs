//! Elastic-net logistic regression over concept vectors: training, serving,
//! evaluation and the coefficient / odds-ratio report.

mod artifact;
mod cv;
mod metrics;
mod report;
mod scaler;
pub mod solver;

pub use artifact::{load_model, save_model, LoadOptions, FORMAT_VERSION};
pub use cv::{cross_validate, stratified_folds, CvReport, FoldReport, MetricSummary};
pub use metrics::{compute_metrics, pairwise_auc, render_table, Confusion, Metrics, MetricsError};
pub use report::{feature_report, render_feature_table, FeatureReportRow};
pub use scaler::Scaler;
pub use solver::{sigmoid, soft_threshold};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{ConceptSchema, ConceptVector};
use solver::{Problem, SolverOptions};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("need at least two samples")]
    EmptyDataset,
    #[error("training data contains a single class")]
    SingleClassDataset,
    #[error("feature row has {got} values, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("vector does not match model schema: {0}")]
    SchemaMismatch(String),
    #[error("insufficient data for cross-validation: {0}")]
    InsufficientData(String),
    #[error("corrupt model artifact: {0}")]
    CorruptArtifact(String),
    #[error("model schema version `{found}` does not match `{expected}`")]
    SchemaVersionMismatch { expected: String, found: String },
    #[error("model artifact io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    Balanced,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Inverse regularization strength.
    pub c: f64,
    /// Share of the penalty that is L1, in `[0, 1]`.
    pub l1_ratio: f64,
    pub class_weighting: ClassWeighting,
    pub decision_threshold: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            c: 1.0,
            l1_ratio: 0.5,
            class_weighting: ClassWeighting::Balanced,
            decision_threshold: 0.5,
            max_iters: 10_000,
            tol: 1e-6,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::InvalidHyperparams(m.to_string()));
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad("C must be positive");
        }
        if !(0.0..=1.0).contains(&self.l1_ratio) {
            return bad("l1_ratio must lie in [0, 1]");
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return bad("decision threshold must lie in (0, 1)");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad("tol must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub n_samples: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbmModel {
    pub format_version: u32,
    pub schema_version: String,
    pub concepts: Vec<String>,
    #[serde(rename = "w")]
    pub coefficients: Vec<f64>,
    #[serde(rename = "b")]
    pub intercept: f64,
    pub scaler: Scaler,
    pub hyperparams: Hyperparams,
    pub trained_at: DateTime<Utc>,
    pub manifest: TrainingManifest,
}

/// Per-sample loss weights: `n / (2·n_y)` under balanced weighting.
pub fn sample_weights(labels: &[u8], weighting: ClassWeighting) -> Vec<f64> {
    let n = labels.len() as f64;
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let n_neg = n - n_pos;
    labels
        .iter()
        .map(|&y| match weighting {
            ClassWeighting::None => 1.0,
            ClassWeighting::Balanced if y == 1 => n / (2.0 * n_pos),
            ClassWeighting::Balanced => n / (2.0 * n_neg),
        })
        .collect()
}

/// Fits the model on raw (unscaled) feature rows ordered as `schema`.
pub fn train(
    schema: &ConceptSchema,
    samples: &[(Vec<f64>, u8)],
    hp: &Hyperparams,
) -> Result<CbmModel, ClassifierError> {
    train_with_trace(schema, samples, hp).map(|(m, _)| m)
}

/// As [`train`], also returning the objective after every solver step.
pub fn train_with_trace(
    schema: &ConceptSchema,
    samples: &[(Vec<f64>, u8)],
    hp: &Hyperparams,
) -> Result<(CbmModel, Vec<f64>), ClassifierError> {
    hp.validate()?;
    if samples.len() < 2 {
        return Err(ClassifierError::EmptyDataset);
    }
    let k = schema.len();
    if let Some((row, _)) = samples.iter().find(|(r, _)| r.len() != k) {
        return Err(ClassifierError::DimensionMismatch {
            expected: k,
            got: row.len(),
        });
    }
    let labels: Vec<u8> = samples.iter().map(|(_, y)| u8::from(*y == 1)).collect();
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(ClassifierError::SingleClassDataset);
    }
    let raw: Vec<Vec<f64>> = samples.iter().map(|(r, _)| r.clone()).collect();
    let scaler = Scaler::fit(&raw)?;
    let rows: Vec<Vec<f64>> = raw.iter().map(|r| scaler.apply(r)).collect();
    let weights = sample_weights(&labels, hp.class_weighting);
    let problem = Problem {
        rows: &rows,
        labels: &labels,
        weights: &weights,
        c: hp.c,
        l1_ratio: hp.l1_ratio,
    };
    let sol = problem.solve(SolverOptions {
        max_iters: hp.max_iters,
        tol: hp.tol,
    });
    if !sol.converged {
        tracing::warn!(iterations = sol.iterations, "solver hit the iteration cap");
    }
    let model = CbmModel {
        format_version: FORMAT_VERSION,
        schema_version: schema.version().to_string(),
        concepts: schema.names().map(String::from).collect(),
        coefficients: sol.w,
        intercept: sol.b,
        scaler,
        hyperparams: hp.clone(),
        trained_at: crate::clock::build_timestamp(),
        manifest: TrainingManifest {
            n_samples: labels.len(),
            n_pos,
            n_neg: labels.len() - n_pos,
            objective: sol.objective,
            iterations: sol.iterations,
            converged: sol.converged,
        },
    };
    Ok((model, sol.trace))
}

impl CbmModel {
    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    /// Probability for a raw feature row in schema order.
    pub fn predict_row(&self, row: &[f64]) -> Result<f64, ClassifierError> {
        if row.len() != self.dim() {
            return Err(ClassifierError::SchemaMismatch(format!(
                "row has {} features, model has {}",
                row.len(),
                self.dim()
            )));
        }
        let z: f64 = self
            .scaler
            .apply(row)
            .iter()
            .zip(&self.coefficients)
            .map(|(x, w)| x * w)
            .sum::<f64>()
            + self.intercept;
        Ok(sigmoid(z))
    }

    pub fn predict_proba(&self, v: &ConceptVector) -> Result<f64, ClassifierError> {
        if v.schema_version != self.schema_version {
            return Err(ClassifierError::SchemaMismatch(format!(
                "vector schema `{}`, model schema `{}`",
                v.schema_version, self.schema_version
            )));
        }
        self.predict_row(&v.to_feature_row())
    }

    pub fn decide_proba(&self, p: f64) -> u8 {
        u8::from(p >= self.hyperparams.decision_threshold)
    }

    pub fn decide(&self, v: &ConceptVector) -> Result<u8, ClassifierError> {
        self.predict_proba(v).map(|p| self.decide_proba(p))
    }

    pub fn coefficient(&self, concept: &str) -> Option<f64> {
        self.concepts
            .iter()
            .position(|c| c == concept)
            .map(|i| self.coefficients[i])
    }

    /// Fails unless the model was trained on `schema`'s concepts in order.
    pub fn check_schema(&self, schema: &ConceptSchema) -> Result<(), ClassifierError> {
        if self.schema_version != schema.version() || !self.concepts.iter().map(String::as_str).eq(schema.names()) {
            return Err(ClassifierError::SchemaMismatch(format!(
                "model trained on `{}`, schema is `{}`",
                self.schema_version,
                schema.version()
            )));
        }
        Ok(())
    }

    /// A hand-built model, for fixtures and tools that bypass training.
    pub fn from_parts(
        schema: &ConceptSchema,
        coefficients: Vec<f64>,
        intercept: f64,
        scaler: Scaler,
        hyperparams: Hyperparams,
    ) -> Result<Self, ClassifierError> {
        let k = schema.len();
        for got in [coefficients.len(), scaler.means.len(), scaler.stds.len()] {
            if got != k {
                return Err(ClassifierError::DimensionMismatch { expected: k, got });
            }
        }
        if scaler.stds.iter().any(|s| s.is_nan() || *s <= 0.0) {
            return Err(ClassifierError::InvalidHyperparams("scaler stddev must be positive".into()));
        }
        hyperparams.validate()?;
        Ok(Self {
            format_version: FORMAT_VERSION,
            schema_version: schema.version().to_string(),
            concepts: schema.names().map(String::from).collect(),
            coefficients,
            intercept,
            scaler,
            hyperparams,
            trained_at: crate::clock::build_timestamp(),
            manifest: TrainingManifest {
                n_samples: 0,
                n_pos: 0,
                n_neg: 0,
                objective: 0.0,
                iterations: 0,
                converged: true,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{ConceptDef, ConceptKind};

    fn schema(k: usize) -> ConceptSchema {
        ConceptSchema::new(
            "t",
            (0..k)
                .map(|i| ConceptDef::new(format!("c{i}"), ConceptKind::Ordinal, ""))
                .collect(),
        )
        .unwrap()
    }

    fn identity(k: usize) -> Scaler {
        Scaler {
            means: vec![0.0; k],
            stds: vec![1.0; k],
        }
    }

    #[test]
    fn correlated_feature_separates() {
        let s = schema(1);
        let samples: Vec<(Vec<f64>, u8)> = (0..20).map(|i| (vec![f64::from(i % 2 * 3)], (i % 2) as u8)).collect();
        let hp = Hyperparams {
            l1_ratio: 0.0,
            c: 100.0,
            ..Default::default()
        };
        let m = train(&s, &samples, &hp).unwrap();
        assert!(m.coefficients[0] > 0.0);
        assert!(m.predict_row(&[3.0]).unwrap() > 0.5);
    }

    #[test]
    fn strong_l1_zeroes_everything() {
        let s = schema(2);
        let samples: Vec<(Vec<f64>, u8)> = (0..30)
            .map(|i| (vec![f64::from(i % 5), f64::from(i % 3)], u8::from(i % 3 == 0)))
            .collect();
        for weighting in [ClassWeighting::None, ClassWeighting::Balanced] {
            let hp = Hyperparams {
                l1_ratio: 1.0,
                c: 1e-4,
                class_weighting: weighting,
                tol: 1e-10,
                ..Default::default()
            };
            let m = train(&s, &samples, &hp).unwrap();
            assert_eq!(m.coefficients, vec![0.0, 0.0]);
            let base = match weighting {
                ClassWeighting::None => 10.0 / 30.0,
                ClassWeighting::Balanced => 0.5,
            };
            assert!((sigmoid(m.intercept) - base).abs() < 1e-6, "{weighting:?}");
        }
    }

    #[test]
    fn training_errors() {
        let s = schema(1);
        let one_class = vec![(vec![1.0], 1), (vec![2.0], 1)];
        assert!(matches!(
            train(&s, &one_class, &Hyperparams::default()),
            Err(ClassifierError::SingleClassDataset)
        ));
        let ragged = vec![(vec![1.0], 1), (vec![2.0, 1.0], 0)];
        assert!(matches!(
            train(&s, &ragged, &Hyperparams::default()),
            Err(ClassifierError::DimensionMismatch { .. })
        ));
        let bad = Hyperparams {
            c: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            train(&s, &[(vec![1.0], 1), (vec![0.0], 0)], &bad),
            Err(ClassifierError::InvalidHyperparams(_))
        ));
    }

    #[test]
    fn prediction_fixtures() {
        let s = schema(1);
        let zero = CbmModel::from_parts(&s, vec![0.0], 0.0, identity(1), Hyperparams::default()).unwrap();
        let v = ConceptVector {
            schema_version: "t".into(),
            values: vec![4],
        };
        assert_eq!(zero.predict_proba(&v).unwrap(), 0.5);
        assert_eq!(zero.decide(&v).unwrap(), 1);

        let m = CbmModel::from_parts(&s, vec![3f64.ln()], 0.0, identity(1), Hyperparams::default()).unwrap();
        assert!((m.predict_row(&[1.0]).unwrap() - 0.75).abs() < 1e-15);

        let other = ConceptVector {
            schema_version: "x".into(),
            values: vec![1],
        };
        assert!(matches!(m.predict_proba(&other), Err(ClassifierError::SchemaMismatch(_))));
    }

    #[test]
    fn monotone_in_positive_weight() {
        let s = schema(2);
        let m = CbmModel::from_parts(
            &s,
            vec![0.8, -0.3],
            -0.2,
            Scaler {
                means: vec![2.0, 1.0],
                stds: vec![1.5, 0.5],
            },
            Hyperparams::default(),
        )
        .unwrap();
        let mut last = 0.0;
        for v in 0..=5 {
            let p = m.predict_row(&[f64::from(v), 3.0]).unwrap();
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn balanced_weights() {
        let w = sample_weights(&[1, 1, 0], ClassWeighting::Balanced);
        assert_eq!(w, vec![0.75, 0.75, 1.5]);
        assert_eq!(sample_weights(&[1, 0], ClassWeighting::None), vec![1.0, 1.0]);
    }
}
