use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cofac_core::backend::{mock_backend, LanguageBackend, RemoteBackend, RemoteConfig, RuleTable};
use cofac_core::dataset::LabeledSample;
use cofac_core::extractor::{extract_concepts, ExtractionResult};
use cofac_core::{fixtures, jsonl};

use crate::config::{load_schema, RunConfig};
use crate::error::{CliError, CliResult, UserContext};
use crate::features::FeatureRow;
use crate::BackendKind;

#[derive(clap::Args)]
pub struct Args {
    /// Output directory of `build-dataset`.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// features.jsonl to create or resume.
    #[arg(long)]
    out: PathBuf,
    /// Mock rule table; the bundled one when absent.
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Concurrent backend calls; output order is unaffected.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn backend(kind: BackendKind, rules: Option<&Path>) -> CliResult<Arc<dyn LanguageBackend>> {
    Ok(match kind {
        BackendKind::Mock => {
            let table: RuleTable = match rules {
                Some(p) => {
                    let text = std::fs::read_to_string(p).user(p.display())?;
                    serde_json::from_str(&text).user(p.display())?
                }
                None => fixtures::mock_rules(),
            };
            Arc::new(mock_backend(table))
        }
        BackendKind::Remote => {
            let cfg = RemoteConfig::from_env().user("remote backend")?;
            Arc::new(RemoteBackend::new(cfg).user("remote backend")?)
        }
    })
}

pub fn parse_backend(name: &str) -> CliResult<BackendKind> {
    match name {
        "mock" => Ok(BackendKind::Mock),
        "remote" => Ok(BackendKind::Remote),
        other => Err(CliError::User(format!("unknown backend `{other}` (mock|remote)"))),
    }
}

pub fn run(args: Args, cfg: &RunConfig) -> CliResult {
    if args.jobs == 0 {
        return Err(CliError::User("--jobs must be at least 1".into()));
    }
    let schema = load_schema(args.schema.as_deref().or(cfg.schema.as_deref()))?;
    let kind = match (args.backend, &cfg.backend) {
        (Some(k), _) => k,
        (None, Some(name)) => parse_backend(name)?,
        (None, None) => BackendKind::Mock,
    };
    let backend = backend(kind, args.rules.as_deref().or(cfg.mock_rules.as_deref()))?;

    let segments_path = args.dataset.join("segments.jsonl");
    if !segments_path.is_file() {
        return Err(CliError::User(format!("{} not found; run build-dataset first", segments_path.display())));
    }
    let samples: Vec<LabeledSample> = jsonl::read_all(&segments_path).user(segments_path.display())?;

    jsonl::truncate_torn_tail(&args.out).user(args.out.display())?;
    let existing: Vec<FeatureRow> = jsonl::read_all(&args.out).user(args.out.display())?;
    if let Some(r) = existing.iter().find(|r| r.schema_version != schema.version()) {
        return Err(CliError::User(format!(
            "{} holds rows for schema `{}`, current schema is `{}`",
            args.out.display(),
            r.schema_version,
            schema.version()
        )));
    }
    let done: BTreeSet<String> = existing.into_iter().map(|r| r.segment_id).collect();
    let todo: Vec<&LabeledSample> = samples.iter().filter(|s| !done.contains(&s.segment.id())).collect();
    eprintln!("{} segments, {} already extracted, {} to go", samples.len(), done.len(), todo.len());

    let mut written = 0;
    for batch in todo.chunks(args.jobs) {
        let results: Vec<Result<ExtractionResult, String>> = std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .iter()
                .map(|s| {
                    let backend = Arc::clone(&backend);
                    let schema = &schema;
                    scope.spawn(move || extract_concepts(&s.segment, schema, backend.as_ref()).map_err(|e| e.to_string()))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err("extraction worker panicked".into())))
                .collect()
        });
        // keep output in dataset order: stop at the first failure
        for (sample, result) in batch.iter().zip(results) {
            let result = result.map_err(|e| {
                CliError::User(format!(
                    "segment {}: {e}; {written} new rows saved, rerun to resume",
                    sample.segment.id()
                ))
            })?;
            let row = FeatureRow {
                segment_id: sample.segment.id(),
                session_id: sample.segment.session_id.clone(),
                t0: sample.segment.t0_s,
                t1: sample.segment.t1_s,
                label: sample.label,
                schema_version: schema.version().to_string(),
                concepts: schema.named_values(&result.vector),
                warnings: result.warnings.len(),
            };
            jsonl::append(&args.out, &row).user(args.out.display())?;
            written += 1;
        }
    }
    println!("extracted {written} rows into {}", args.out.display());
    Ok(())
}
