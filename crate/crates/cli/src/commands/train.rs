use std::path::{Path, PathBuf};

use cofac_core::classifier::{
    feature_report, render_feature_table, save_model, train, ClassWeighting, ClassifierError, Hyperparams,
};
use cofac_core::jsonl;

use crate::config::{load_schema, RunConfig};
use crate::error::{CliError, CliResult, UserContext};
use crate::features::training_samples;

#[derive(clap::Args, Clone)]
pub struct HyperArgs {
    /// Inverse regularization strength.
    #[arg(long = "C")]
    pub c: Option<f64>,
    #[arg(long)]
    pub l1_ratio: Option<f64>,
    /// Disable balanced class weights.
    #[arg(long)]
    pub unweighted: bool,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl HyperArgs {
    pub fn resolve(&self, cfg: &RunConfig) -> Hyperparams {
        let mut hp = cfg.hyperparams.clone().unwrap_or_default();
        if let Some(seed) = cfg.seed {
            hp.seed = seed;
        }
        if let Some(c) = self.c {
            hp.c = c;
        }
        if let Some(a) = self.l1_ratio {
            hp.l1_ratio = a;
        }
        if self.unweighted {
            hp.class_weighting = ClassWeighting::None;
        }
        if let Some(t) = self.threshold {
            hp.decision_threshold = t;
        }
        if let Some(m) = self.max_iters {
            hp.max_iters = m;
        }
        if let Some(t) = self.tol {
            hp.tol = t;
        }
        if let Some(s) = self.seed {
            hp.seed = s;
        }
        hp
    }
}

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    features: PathBuf,
    /// Model artifact to write; the feature report goes next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperArgs,
}

pub fn report_path(model: &Path) -> PathBuf {
    let stem = model.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    model.with_file_name(format!("{stem}.features.json"))
}

pub fn classifier_error(e: ClassifierError) -> CliError {
    CliError::User(e.to_string())
}

pub fn run(args: Args, cfg: &RunConfig) -> CliResult {
    let schema = load_schema(args.schema.as_deref().or(cfg.schema.as_deref()))?;
    let hp = args.hyper.resolve(cfg);
    let samples = training_samples(&args.features, &schema)?;
    let model = train(&schema, &samples, &hp).map_err(classifier_error)?;
    if !model.manifest.converged {
        eprintln!("warning: solver stopped at the iteration cap ({})", model.manifest.iterations);
    }
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).user(dir.display())?;
    }
    save_model(&model, &args.out).map_err(classifier_error)?;
    let rows = feature_report(&model);
    let report = report_path(&args.out);
    jsonl::write_json_atomic(&report, &rows).user(report.display())?;

    println!(
        "trained on {} samples ({} positive, {} negative), objective {:.6}, {} iterations",
        model.manifest.n_samples, model.manifest.n_pos, model.manifest.n_neg, model.manifest.objective, model.manifest.iterations
    );
    print!("{}", render_feature_table(&rows));
    println!("model: {}\nreport: {}", args.out.display(), report.display());
    Ok(())
}
