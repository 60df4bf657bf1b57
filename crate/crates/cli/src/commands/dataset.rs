use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use cofac_core::dataset::{build_dataset, parse_coding_sheet, read_transcript, DatasetError, SessionInput};
use cofac_core::jsonl;
use serde::Deserialize;

use crate::error::{CliError, CliResult, UserContext};

#[derive(clap::Args)]
pub struct Args {
    /// Directory of `<session_id>.jsonl` transcripts.
    #[arg(long)]
    transcripts: PathBuf,
    /// Coding sheet CSV: session_id,timestamp_s,code,rationale.
    #[arg(long)]
    codes: PathBuf,
    /// Session lengths CSV: session_id,duration_s. Defaults to the last utterance end.
    #[arg(long)]
    durations: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Deserialize)]
struct DurationRow {
    session_id: String,
    duration_s: f64,
}

fn read_durations(path: &Path) -> CliResult<BTreeMap<String, f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .user(path.display())?;
    let mut out = BTreeMap::new();
    for row in rdr.deserialize::<DurationRow>() {
        let row = row.user(path.display())?;
        if !(row.duration_s > 0.0 && row.duration_s.is_finite()) {
            return Err(CliError::User(format!(
                "{}: duration for {} must be positive",
                path.display(),
                row.session_id
            )));
        }
        out.insert(row.session_id, row.duration_s);
    }
    Ok(out)
}

pub fn run(args: Args) -> CliResult {
    if !args.transcripts.is_dir() {
        return Err(CliError::User(format!(
            "transcripts directory {} not found",
            args.transcripts.display()
        )));
    }
    let annotations = match parse_coding_sheet(&args.codes) {
        Ok(a) => a,
        Err(DatasetError::EmptySheet) => {
            eprintln!("warning: coding sheet {} has no rows; every sample will be negative", args.codes.display());
            Vec::new()
        }
        Err(e) => return Err(CliError::User(e.to_string())),
    };
    let durations = match &args.durations {
        Some(p) => read_durations(p)?,
        None => BTreeMap::new(),
    };

    let mut paths: Vec<PathBuf> = std::fs::read_dir(&args.transcripts)
        .user(args.transcripts.display())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();

    let mut sessions = Vec::new();
    for path in &paths {
        let session_id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let file = std::fs::File::open(path).user(path.display())?;
        let utterances = read_transcript(BufReader::new(file)).user(path.display())?;
        let duration_s = match durations.get(&session_id) {
            Some(d) => *d,
            None => utterances.iter().map(|u| u.t1_s).fold(0.0, f64::max),
        };
        sessions.push(SessionInput {
            annotations: annotations.iter().filter(|a| a.session_id == session_id).cloned().collect(),
            session_id,
            utterances,
            duration_s,
        });
    }
    for a in &annotations {
        if !sessions.iter().any(|s| s.session_id == a.session_id) {
            return Err(CliError::User(format!(
                "coding sheet references session `{}` but {} has no transcript for it",
                a.session_id,
                args.transcripts.join(format!("{}.jsonl", a.session_id)).display()
            )));
        }
    }

    let dataset = build_dataset(&sessions);
    std::fs::create_dir_all(&args.out).user(args.out.display())?;
    let segments = args.out.join("segments.jsonl");
    if segments.exists() {
        std::fs::remove_file(&segments).user(segments.display())?;
    }
    for s in &dataset.samples {
        jsonl::append(&segments, s).user(segments.display())?;
    }
    jsonl::write_json_atomic(&args.out.join("manifest.json"), &dataset.manifest).user(args.out.display())?;

    if dataset.skipped_annotations > 0 {
        eprintln!("warning: {} annotations fall after their session end and were ignored", dataset.skipped_annotations);
    }
    println!("sessions  {}", dataset.manifest.sessions.len());
    println!("positive  {}", dataset.manifest.total_pos);
    println!("negative  {}", dataset.manifest.total_neg);
    Ok(())
}
