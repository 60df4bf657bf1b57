use serde::{Deserialize, Serialize};

use super::ClassifierError;

/// Per-feature z-score statistics. Constant features keep stddev 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, ClassifierError> {
        if rows.len() < 2 {
            return Err(ClassifierError::EmptyDataset);
        }
        let k = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != k) {
            return Err(ClassifierError::DimensionMismatch {
                expected: k,
                got: bad.len(),
            });
        }
        let n = rows.len() as f64;
        let mut means = vec![0.0; k];
        for r in rows {
            for (m, x) in means.iter_mut().zip(r) {
                *m += x;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; k];
        for r in rows {
            for ((v, x), m) in vars.iter_mut().zip(r).zip(&means) {
                *v += (x - m) * (x - m);
            }
        }
        let stds = vars
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { means, stds })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}
