use std::path::PathBuf;

use cofac_core::classifier::{compute_metrics, cross_validate, load_model, render_table, LoadOptions, Metrics};
use cofac_core::jsonl;

use super::train::{classifier_error, HyperArgs};
use crate::config::{load_schema, RunConfig};
use crate::error::{CliError, CliResult, UserContext};
use crate::features::training_samples;

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    features: PathBuf,
    /// Scores this model on the features; with --cv its hyperparameters are reused.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Number of stratified folds.
    #[arg(long)]
    cv: Option<usize>,
    /// Also write the full cross-validation report here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperArgs,
}

fn summary_row(name: &str, m: &[&Metrics]) -> String {
    let mean = |f: fn(&Metrics) -> f64| m.iter().map(|x| f(x)).sum::<f64>() / m.len() as f64;
    format!(
        "{name:<8} accuracy {:.3}  precision {:.3}  recall {:.3}  f1 {:.3}",
        mean(|x| x.accuracy),
        mean(|x| x.precision),
        mean(|x| x.recall),
        mean(|x| x.f1)
    )
}

pub fn run(args: Args, cfg: &RunConfig) -> CliResult {
    let schema = load_schema(args.schema.as_deref().or(cfg.schema.as_deref()))?;
    let samples = training_samples(&args.features, &schema)?;
    let model_path = args.model.clone().or_else(|| cfg.model.clone());
    let model = match &model_path {
        Some(p) => {
            let opts = LoadOptions {
                expected_schema_version: Some(schema.version().to_string()),
                allow_schema_mismatch: false,
            };
            Some(load_model(p, &opts).map_err(classifier_error)?)
        }
        None => None,
    };

    match (args.cv, model) {
        (Some(k), model) => {
            let mut hp = match &model {
                Some(m) => m.hyperparams.clone(),
                None => args.hyper.resolve(cfg),
            };
            if let Some(seed) = args.hyper.seed.or(cfg.seed) {
                hp.seed = seed;
            }
            let report = cross_validate(&schema, &samples, &hp, k).map_err(classifier_error)?;
            let rows: Vec<(String, &Metrics)> =
                report.folds.iter().map(|f| (format!("fold {}", f.fold), &f.metrics)).collect();
            print!("{}", render_table(&rows));
            let all: Vec<&Metrics> = report.folds.iter().map(|f| &f.metrics).collect();
            println!("{}", summary_row("mean", &all));
            if let Some(auc) = report.roc_auc {
                println!("roc_auc  {:.3} ± {:.3}", auc.mean, auc.std);
            }
            for f in &report.folds {
                println!("{}", serde_json::to_string(f).map_err(|e| CliError::Internal(e.to_string()))?);
            }
            if let Some(p) = &args.report {
                jsonl::write_json_atomic(p, &report).user(p.display())?;
            }
        }
        (None, Some(model)) => {
            let mut labels = Vec::with_capacity(samples.len());
            let mut probs = Vec::with_capacity(samples.len());
            for (row, y) in &samples {
                probs.push(model.predict_row(row).map_err(classifier_error)?);
                labels.push(*y);
            }
            let decisions: Vec<u8> = probs.iter().map(|&p| model.decide_proba(p)).collect();
            let m = compute_metrics(&labels, &decisions, &probs).user("metrics")?;
            print!("{}", render_table(&[("model".to_string(), &m)]));
            if let Some(p) = &args.report {
                jsonl::write_json_atomic(p, &m).user(p.display())?;
            }
        }
        (None, None) => return Err(CliError::User("pass --model, --cv, or both".into())),
    }
    Ok(())
}
