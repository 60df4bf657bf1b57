use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("labels, decisions and probabilities differ in length ({0}, {1}, {2})")]
    LengthMismatch(usize, usize, usize),
    #[error("no samples")]
    Empty,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Absent when only one class is present.
    pub roc_auc: Option<f64>,
    pub confusion: Confusion,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Fraction of (positive, negative) pairs ranked correctly; ties count half.
pub fn pairwise_auc(labels: &[u8], probs: &[f64]) -> Option<f64> {
    let pos: Vec<f64> = labels.iter().zip(probs).filter(|(&y, _)| y == 1).map(|(_, &p)| p).collect();
    let neg: Vec<f64> = labels.iter().zip(probs).filter(|(&y, _)| y != 1).map(|(_, &p)| p).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut score = 0.0;
    for &p in &pos {
        for &n in &neg {
            score += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    Some(score / (pos.len() * neg.len()) as f64)
}

pub fn compute_metrics(labels: &[u8], decisions: &[u8], probs: &[f64]) -> Result<Metrics, MetricsError> {
    if labels.len() != decisions.len() || labels.len() != probs.len() {
        return Err(MetricsError::LengthMismatch(labels.len(), decisions.len(), probs.len()));
    }
    if labels.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut c = Confusion::default();
    for (&y, &d) in labels.iter().zip(decisions) {
        match (y == 1, d == 1) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics {
        accuracy: ratio(c.tp + c.tn, c.total()),
        precision,
        recall,
        f1,
        roc_auc: pairwise_auc(labels, probs),
        confusion: c,
    })
}

/// Fixed-width table of one or more labeled metric rows.
pub fn render_table(rows: &[(String, &Metrics)]) -> String {
    let mut out = format!(
        "{:<12} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
        "", "accuracy", "precision", "recall", "f1", "auc"
    );
    for (label, m) in rows {
        let auc = m.roc_auc.map_or_else(|| "n/a".to_string(), |a| format!("{a:.3}"));
        out.push_str(&format!(
            "{:<12} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9}\n",
            label, m.accuracy, m.precision, m.recall, m.f1, auc
        ));
    }
    out
}
