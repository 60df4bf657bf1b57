use serde::{Deserialize, Serialize};

use super::CbmModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReportRow {
    pub concept: String,
    pub coefficient: f64,
    pub odds_ratio: f64,
}

/// Coefficients with `odds_ratio = exp(coefficient)`, largest coefficient first.
pub fn feature_report(model: &CbmModel) -> Vec<FeatureReportRow> {
    let mut rows: Vec<FeatureReportRow> = model
        .concepts
        .iter()
        .zip(&model.coefficients)
        .map(|(concept, &coefficient)| FeatureReportRow {
            concept: concept.clone(),
            coefficient,
            odds_ratio: coefficient.exp(),
        })
        .collect();
    // stable: ties keep schema order
    rows.sort_by(|a, b| b.coefficient.total_cmp(&a.coefficient));
    rows
}

pub fn render_feature_table(rows: &[FeatureReportRow]) -> String {
    let width = rows.iter().map(|r| r.concept.len()).max().unwrap_or(0).max(7);
    let mut out = format!("{:<width$}  {:>11}  {:>10}\n", "concept", "coefficient", "odds ratio");
    for r in rows {
        out.push_str(&format!(
            "{:<width$}  {:>11.3}  {:>10.3}\n",
            r.concept, r.coefficient, r.odds_ratio
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{Hyperparams, Scaler};
    use crate::schema::{ConceptDef, ConceptKind, ConceptSchema};

    fn model(coefs: Vec<f64>) -> CbmModel {
        let k = coefs.len();
        let schema = ConceptSchema::new(
            "t",
            (0..k)
                .map(|i| ConceptDef::new(format!("c{i}"), ConceptKind::Ordinal, ""))
                .collect(),
        )
        .unwrap();
        CbmModel::from_parts(
            &schema,
            coefs,
            0.0,
            Scaler {
                means: vec![0.0; k],
                stds: vec![1.0; k],
            },
            Hyperparams::default(),
        )
        .unwrap()
    }

    #[test]
    fn odds_ratios_and_order() {
        let rows = feature_report(&model(vec![0.0, 0.446, -0.524, 0.554]));
        let names: Vec<&str> = rows.iter().map(|r| r.concept.as_str()).collect();
        assert_eq!(names, vec!["c3", "c1", "c0", "c2"]);
        assert_eq!(rows[2].odds_ratio, 1.0);
        // published pairs are rounded to three decimals
        assert!((rows[0].odds_ratio - 1.741).abs() < 1e-3);
        assert!((rows[1].odds_ratio - 1.562).abs() < 1e-3);
        let table = render_feature_table(&rows);
        assert!(table.lines().nth(1).unwrap().starts_with("c3"));
    }
}
