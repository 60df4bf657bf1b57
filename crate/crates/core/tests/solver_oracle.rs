use std::time::Instant;

use cofac_core::classifier::solver::Problem;
use cofac_core::classifier::{sample_weights, train, ClassWeighting, Hyperparams};
use cofac_core::schema::{ConceptDef, ConceptKind, ConceptSchema};
use cofac_testkit::{central_diff, grid, rng, synthetic_2d};
use rand::Rng;

fn schema(k: usize) -> ConceptSchema {
    ConceptSchema::new(
        "synthetic",
        (0..k)
            .map(|i| ConceptDef::new(format!("f{i}"), ConceptKind::Ordinal, ""))
            .collect(),
    )
    .unwrap()
}

fn samples(x: &[[f64; 2]], y: &[u8]) -> Vec<(Vec<f64>, u8)> {
    x.iter().zip(y).map(|(r, &l)| (r.to_vec(), l)).collect()
}

#[test]
fn objective_matches_grid_search() {
    let started = Instant::now();
    for (seed, c, alpha) in [(1, 1.0, 0.5), (2, 0.5, 1.0), (3, 2.0, 0.0)] {
        let (x, y) = synthetic_2d(40, seed);
        let hp = Hyperparams {
            c,
            l1_ratio: alpha,
            tol: 1e-10,
            ..Hyperparams::default()
        };
        let model = train(&schema(2), &samples(&x, &y), &hp).unwrap();
        assert!(model.manifest.converged);

        let data = grid::Data {
            x: grid::standardize(&x),
            s: grid::balanced(&y),
            y: y.clone(),
        };
        let at_model = grid::objective(
            &data,
            [model.coefficients[0], model.coefficients[1]],
            model.intercept,
            c,
            alpha,
        );
        assert!((at_model - model.manifest.objective).abs() < 1e-9);

        let (best, params) = grid::search(&data, c, alpha);
        let gap = model.manifest.objective - best;
        assert!(gap.abs() < 1e-3, "seed {seed}: solver {} grid {best} at {params:?}", model.manifest.objective);
    }
    assert!(started.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn gradient_matches_finite_differences() {
    let (x, y) = synthetic_2d(40, 7);
    let rows: Vec<Vec<f64>> = grid::standardize(&x).iter().map(|r| r.to_vec()).collect();
    let weights = sample_weights(&y, ClassWeighting::Balanced);
    let p = Problem {
        rows: &rows,
        labels: &y,
        weights: &weights,
        c: 1.0,
        l1_ratio: 0.5,
    };
    let mut r = rng(11);
    for _ in 0..100 {
        let point: Vec<f64> = (0..3).map(|_| r.random_range(-3.0..3.0)).collect();
        let (gw, gb) = p.smooth_gradient(&point[..2], point[2]);
        let analytic = [gw[0], gw[1], gb];
        let numeric = central_diff(|v| p.smooth_objective(&v[..2], v[2]), &point, 1e-5);
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8);
        assert!(diff / scale < 1e-5, "at {point:?}: {analytic:?} vs {numeric:?}");
    }
}

#[test]
fn duplicated_feature_gets_equal_ridge_weights() {
    let (x, y) = synthetic_2d(60, 5);
    let rows: Vec<(Vec<f64>, u8)> = x.iter().zip(&y).map(|(r, &l)| (vec![r[0], r[0], r[1]], l)).collect();
    let hp = Hyperparams {
        l1_ratio: 0.0,
        tol: 1e-12,
        ..Hyperparams::default()
    };
    let m = train(&schema(3), &rows, &hp).unwrap();
    assert!((m.coefficients[0] - m.coefficients[1]).abs() < 1e-8, "{:?}", m.coefficients);
}

#[test]
fn balanced_weights_equal_minority_duplication() {
    let (x, _) = synthetic_2d(30, 9);
    // exactly 10 positives and 20 negatives
    let y: Vec<u8> = (0..30).map(|i| u8::from(i % 3 == 0)).collect();
    let weighted = samples(&x, &y);
    let mut duplicated = weighted.clone();
    duplicated.extend(weighted.iter().filter(|(_, l)| *l == 1).cloned());

    let base = Hyperparams {
        c: 1e8,
        tol: 1e-12,
        max_iters: 200_000,
        ..Hyperparams::default()
    };
    let mw = train(&schema(2), &weighted, &base).unwrap();
    let md = train(
        &schema(2),
        &duplicated,
        &Hyperparams {
            class_weighting: ClassWeighting::None,
            ..base.clone()
        },
    )
    .unwrap();
    for (row, _) in &weighted {
        let (a, b) = (mw.predict_row(row).unwrap(), md.predict_row(row).unwrap());
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn decisions_invariant_to_feature_scale() {
    let (x, y) = synthetic_2d(50, 13);
    let m1 = train(&schema(2), &samples(&x, &y), &Hyperparams::default()).unwrap();
    let scaled: Vec<[f64; 2]> = x.iter().map(|r| [r[0] * 7.5 + 3.0, r[1] * 0.01 - 2.0]).collect();
    let m2 = train(&schema(2), &samples(&scaled, &y), &Hyperparams::default()).unwrap();
    for (a, b) in x.iter().zip(&scaled) {
        let (pa, pb) = (m1.predict_row(a).unwrap(), m2.predict_row(b).unwrap());
        assert!((pa - pb).abs() < 1e-6);
        assert_eq!(m1.decide_proba(pa), m2.decide_proba(pb));
    }
}
