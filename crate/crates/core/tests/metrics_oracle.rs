use cofac_core::classifier::{compute_metrics, feature_report, pairwise_auc, Confusion};
use cofac_core::fixtures::fixture_model;
use cofac_testkit::{rng, trapezoid_auc};
use rand::Rng;

#[test]
fn pairwise_auc_matches_trapezoid_roc() {
    let mut r = rng(42);
    for round in 0..20 {
        let labels: Vec<u8> = (0..200).map(|_| u8::from(r.random_bool(0.35))).collect();
        // coarse scores on some rounds so ties are exercised
        let scores: Vec<f64> = labels
            .iter()
            .map(|&y| {
                let s = r.random_range(0.0..1.0) + 0.3 * f64::from(y);
                if round % 2 == 0 {
                    (s * 10.0).round() / 10.0
                } else {
                    s
                }
            })
            .collect();
        let a = pairwise_auc(&labels, &scores).unwrap();
        let b = trapezoid_auc(&labels, &scores);
        assert!((a - b).abs() < 1e-9, "round {round}: {a} vs {b}");
    }
}

#[test]
fn hand_computed_precision_recall_f1() {
    let m = compute_metrics(&[1, 1, 0], &[1, 0, 0], &[0.8, 0.3, 0.2]).unwrap();
    assert_eq!(m.precision, 1.0);
    assert_eq!(m.recall, 0.5);
    assert_eq!(m.f1, 2.0 / 3.0);
    assert_eq!(m.confusion, Confusion { tp: 1, fp: 0, tn: 1, fn_: 1 });
}

#[test]
fn odds_ratio_identity() {
    for row in feature_report(&fixture_model()) {
        assert!((row.odds_ratio - row.coefficient.exp()).abs() < 1e-12);
    }
}
