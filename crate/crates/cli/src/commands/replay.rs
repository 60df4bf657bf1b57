use std::collections::BTreeMap;
use std::path::PathBuf;

use cofac_core::advisor::SegmentRef;
use cofac_core::classifier::{load_model, CbmModel, LoadOptions};
use cofac_core::editing::{apply_edit, EditOutcome, EditRequest};
use cofac_core::jsonl;
use cofac_core::schema::{ConceptSchema, ConceptVector};
use cofac_service::model::SegmentAnalysis;
use serde::Serialize;

use super::train::classifier_error;
use crate::config::{load_schema, require_file, RunConfig};
use crate::error::{CliError, CliResult, UserContext};

#[derive(clap::Args)]
pub struct Args {
    /// Session directory holding `timeline.jsonl`.
    #[arg(long)]
    session_log: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Edit log (the session's `edits.jsonl` format) to re-apply.
    #[arg(long)]
    edits: Option<PathBuf>,
    /// Write corrected concept vectors as JSON Lines.
    #[arg(long)]
    export_corrected: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Serialize)]
struct CorrectedRow {
    segment_ref: SegmentRef,
    t0: f64,
    t1: f64,
    schema_version: String,
    concepts: BTreeMap<String, i64>,
    original_decision: u8,
    corrected_decision: u8,
    edits: usize,
}

fn decide(model: &CbmModel, v: &ConceptVector) -> CliResult<(f64, u8)> {
    let p = model.predict_proba(v).map_err(classifier_error)?;
    Ok((p, model.decide_proba(p)))
}

fn check_vector(schema: &ConceptSchema, index: usize, v: &ConceptVector) -> CliResult {
    schema.check(v).map_err(|e| CliError::User(format!("segment {index}: {e}")))
}

pub fn run(args: Args, cfg: &RunConfig) -> CliResult {
    let schema = load_schema(args.schema.as_deref().or(cfg.schema.as_deref()))?;
    let model_path = args
        .model
        .clone()
        .or_else(|| cfg.model.clone())
        .ok_or_else(|| CliError::User("--model is required".into()))?;
    require_file(&model_path, "model")?;
    let model = load_model(&model_path, &LoadOptions::default()).map_err(classifier_error)?;
    model.check_schema(&schema).map_err(classifier_error)?;

    let timeline_path = args.session_log.join("timeline.jsonl");
    require_file(&timeline_path, "timeline")?;
    let timeline: Vec<SegmentAnalysis> = jsonl::read_all(&timeline_path).user(timeline_path.display())?;

    let mut matches = 0;
    println!("{:>5}  {:>9}  {:>6}  {:>8}  {:>6}", "index", "stored_p", "stored", "replay_p", "replay");
    for a in &timeline {
        check_vector(&schema, a.index, &a.extraction.vector)?;
        let (p, d) = decide(&model, &a.extraction.vector)?;
        if d == a.decision {
            matches += 1;
        }
        println!("{:>5}  {:>9.4}  {:>6}  {:>8.4}  {:>6}", a.index, a.probability, a.decision, p, d);
    }
    println!("{matches}/{} decisions match the stored timeline", timeline.len());

    let mut working: BTreeMap<usize, (ConceptVector, usize)> = timeline
        .iter()
        .map(|a| (a.index, (a.extraction.vector.clone(), 0)))
        .collect();
    if let Some(path) = &args.edits {
        require_file(path, "edits file")?;
        let edits: Vec<EditOutcome> = jsonl::read_all(path).user(path.display())?;
        let mut flips = 0;
        for stored in &edits {
            let e = &stored.edit;
            let (vector, count) = working
                .get_mut(&e.segment_ref.index)
                .ok_or_else(|| CliError::User(format!("edit refers to unknown segment {}", e.segment_ref.index)))?;
            let request = EditRequest {
                concept: e.concept.clone(),
                old_value: e.old_value,
                new_value: e.new_value,
                editor: e.editor.clone(),
            };
            let (next, outcome) = apply_edit(&model, &schema, vector, e.segment_ref.clone(), &request, e.edited_at)
                .map_err(|err| CliError::User(format!("segment {}: {err}", e.segment_ref.index)))?;
            *vector = next;
            *count += 1;
            if outcome.flipped {
                flips += 1;
            }
            println!(
                "segment {} {}: {} -> {}  p {:.4} -> {:.4}  decision {} -> {}{}",
                e.segment_ref.index,
                e.concept,
                e.old_value,
                e.new_value,
                outcome.prob_before,
                outcome.prob_after,
                outcome.decision_before,
                outcome.decision_after,
                if outcome.flipped { "  FLIP" } else { "" }
            );
        }
        println!("{} edits applied, {flips} flipped a decision", edits.len());
    }

    if let Some(out) = &args.export_corrected {
        let mut rows = Vec::with_capacity(timeline.len());
        for a in &timeline {
            let (vector, edits) = &working[&a.index];
            rows.push(CorrectedRow {
                segment_ref: SegmentRef {
                    session_id: a.segment.session_id.clone(),
                    index: a.index,
                },
                t0: a.segment.t0_s,
                t1: a.segment.t1_s,
                schema_version: vector.schema_version.clone(),
                concepts: schema.named_values(vector),
                original_decision: decide(&model, &a.extraction.vector)?.1,
                corrected_decision: decide(&model, vector)?.1,
                edits: *edits,
            });
        }
        let _ = std::fs::remove_file(out);
        for r in &rows {
            jsonl::append(out, r).user(out.display())?;
        }
        println!("corrected vectors: {}", out.display());
    }
    Ok(())
}
