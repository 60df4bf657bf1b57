use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{compute_metrics, train, ClassifierError, Hyperparams, Metrics};
use crate::schema::ConceptSchema;

/// Stratified fold assignment: `result[i]` is the test fold of sample `i`.
///
/// Each class is shuffled with the seed, classes are concatenated (negatives
/// first) and dealt round-robin, so fold sizes differ by at most one and each
/// fold's class counts are within one of the global proportion.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 1).collect();
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    neg.shuffle(&mut rng);
    pos.shuffle(&mut rng);
    let mut folds = vec![0; labels.len()];
    for (slot, idx) in neg.into_iter().chain(pos).enumerate() {
        folds[idx] = slot % k;
    }
    folds
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_test_pos: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

impl MetricSummary {
    /// Mean and sample standard deviation; `std` is 0 for a single value.
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldReport>,
    pub accuracy: MetricSummary,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f1: MetricSummary,
    /// Over folds whose test split contains both classes.
    pub roc_auc: Option<MetricSummary>,
}

/// Stratified k-fold cross-validation; the scaler is refit on each training split.
pub fn cross_validate(
    schema: &ConceptSchema,
    samples: &[(Vec<f64>, u8)],
    hp: &Hyperparams,
    k: usize,
) -> Result<CvReport, ClassifierError> {
    if k < 2 {
        return Err(ClassifierError::InsufficientData(format!("k = {k}, need at least 2 folds")));
    }
    if samples.len() < k {
        return Err(ClassifierError::InsufficientData(format!(
            "{} samples for {k} folds",
            samples.len()
        )));
    }
    let labels: Vec<u8> = samples.iter().map(|(_, y)| u8::from(*y == 1)).collect();
    let assignment = stratified_folds(&labels, k, hp.seed);

    let mut folds = Vec::with_capacity(k);
    for fold in 0..k {
        let (test, train_set): (Vec<_>, Vec<_>) = samples
            .iter()
            .zip(&assignment)
            .partition(|(_, &f)| f == fold);
        let train_set: Vec<(Vec<f64>, u8)> = train_set.into_iter().map(|(s, _)| s.clone()).collect();
        let n_train_pos = train_set.iter().filter(|(_, y)| *y == 1).count();
        if n_train_pos == 0 || n_train_pos == train_set.len() {
            return Err(ClassifierError::InsufficientData(format!(
                "training split for fold {fold} has a single class"
            )));
        }
        let model = train(schema, &train_set, hp)?;
        let mut ys = Vec::with_capacity(test.len());
        let mut probs = Vec::with_capacity(test.len());
        for ((row, y), _) in &test {
            probs.push(model.predict_row(row)?);
            ys.push(u8::from(*y == 1));
        }
        let decisions: Vec<u8> = probs.iter().map(|&p| model.decide_proba(p)).collect();
        let metrics = compute_metrics(&ys, &decisions, &probs)
            .map_err(|e| ClassifierError::InsufficientData(e.to_string()))?;
        folds.push(FoldReport {
            fold,
            n_train: train_set.len(),
            n_test: ys.len(),
            n_test_pos: ys.iter().filter(|&&y| y == 1).count(),
            metrics,
        });
    }

    let col = |f: fn(&Metrics) -> f64| -> Vec<f64> { folds.iter().map(|r| f(&r.metrics)).collect() };
    let aucs: Vec<f64> = folds.iter().filter_map(|r| r.metrics.roc_auc).collect();
    Ok(CvReport {
        k,
        seed: hp.seed,
        accuracy: MetricSummary::of(&col(|m| m.accuracy)).expect("k >= 2"),
        precision: MetricSummary::of(&col(|m| m.precision)).expect("k >= 2"),
        recall: MetricSummary::of(&col(|m| m.recall)).expect("k >= 2"),
        f1: MetricSummary::of(&col(|m| m.f1)).expect("k >= 2"),
        roc_auc: MetricSummary::of(&aucs),
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{ConceptDef, ConceptKind};

    #[test]
    fn fold_sizes_for_517_rows() {
        let labels: Vec<u8> = (0..517).map(|i| u8::from(i < 358)).collect();
        let folds = stratified_folds(&labels, 5, 7);
        let mut sizes = vec![0; 5];
        let mut pos = [0; 5];
        for (i, &f) in folds.iter().enumerate() {
            sizes[f] += 1;
            pos[f] += usize::from(labels[i]);
        }
        let mut sorted = sizes.clone();
        sorted.sort();
        assert_eq!(sorted, vec![103, 103, 103, 104, 104]);
        for f in 0..5 {
            let expected = sizes[f] as f64 * 358.0 / 517.0;
            assert!((pos[f] as f64 - expected).abs() <= 1.0, "fold {f}: {} vs {expected}", pos[f]);
        }
        assert_eq!(folds, stratified_folds(&labels, 5, 7));
        assert_ne!(folds, stratified_folds(&labels, 5, 8));
    }

    #[test]
    fn leave_one_out() {
        let schema = ConceptSchema::new("t", vec![ConceptDef::new("a", ConceptKind::Ordinal, "")]).unwrap();
        let samples: Vec<(Vec<f64>, u8)> = (0..8).map(|i| (vec![f64::from(i % 4)], u8::from(i % 4 >= 2))).collect();
        let r = cross_validate(&schema, &samples, &Hyperparams::default(), 8).unwrap();
        assert_eq!(r.folds.len(), 8);
        assert!(r.folds.iter().all(|f| f.n_test == 1 && f.metrics.roc_auc.is_none()));
        assert!(r.roc_auc.is_none());
    }

    #[test]
    fn rejects_too_few_samples() {
        let schema = ConceptSchema::new("t", vec![ConceptDef::new("a", ConceptKind::Binary, "")]).unwrap();
        let samples = vec![(vec![0.0], 0), (vec![1.0], 1)];
        assert!(matches!(
            cross_validate(&schema, &samples, &Hyperparams::default(), 5),
            Err(ClassifierError::InsufficientData(_))
        ));
    }
}
