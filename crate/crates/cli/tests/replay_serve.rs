mod common;

use std::path::Path;
use std::sync::Arc;

use chrono::{TimeZone, Utc};
use cofac_core::backend::mock_backend;
use cofac_core::classifier::save_model;
use cofac_core::clock::SteppingClock;
use cofac_core::{default_schema, fixtures};
use cofac_service::model::{EditBody, IngestSegment, SessionMeta, SessionStatus};
use cofac_service::session::{Pipeline, Session};
use common::*;

/// Runs the scripted session in-process and edits segment 2 so its decision flips.
fn recorded_session(root: &Path) -> std::path::PathBuf {
    let schema = default_schema();
    let pipeline = Pipeline {
        schema: schema.clone(),
        backend: Arc::new(mock_backend(fixtures::mock_rules())),
        fewshot: fixtures::fewshot(),
        clock: Arc::new(SteppingClock::new(Utc.timestamp_opt(1_700_000_000, 0).unwrap(), 250)),
        speech: None,
        summary_budget: 2000,
    };
    let model = fixtures::fixture_model();
    let dir = root.join("sessions/s-1");
    let meta = SessionMeta {
        session_id: "s-1".into(),
        stage_goals: fixtures::demo_goals(),
        model_ref: "fixture".into(),
        status: SessionStatus::Active,
        created_at: Utc.timestamp_opt(1_700_000_000, 0).unwrap(),
        closed_at: None,
    };
    let mut session = Session::create(dir.clone(), meta, &schema).unwrap();
    for seg in fixtures::demo_segments("s-1") {
        session
            .ingest(
                &model,
                &pipeline,
                IngestSegment {
                    t0: seg.t0_s,
                    t1: seg.t1_s,
                    utterances: seg.utterances,
                },
            )
            .unwrap();
    }
    let edit = EditBody {
        concept: "Deny Changes".into(),
        old_value: 5,
        new_value: 0,
        editor: None,
        request_advice: false,
    };
    assert!(session.edit(&model, &pipeline, 2, edit).unwrap().outcome.flipped);
    dir
}

#[test]
fn replay_matches_stored_decisions_and_reports_flips() {
    let dir = tempfile::tempdir().unwrap();
    let session = recorded_session(dir.path());
    let model = dir.path().join("fixture.json");
    save_model(&fixtures::fixture_model(), &model).unwrap();

    let plain = ok(&["replay", "--session-log", p(&session), "--model", p(&model)]);
    assert!(plain.contains("5/5 decisions match"), "{plain}");

    let corrected = dir.path().join("corrected.jsonl");
    let edited = ok(&[
        "replay",
        "--session-log",
        p(&session),
        "--model",
        p(&model),
        "--edits",
        p(&session.join("edits.jsonl")),
        "--export-corrected",
        p(&corrected),
    ]);
    assert!(edited.contains("segment 2 Deny Changes: 5 -> 0"), "{edited}");
    assert!(edited.contains("decision 1 -> 0  FLIP"), "{edited}");
    assert!(edited.contains("1 edits applied, 1 flipped"), "{edited}");
    let rows: Vec<serde_json::Value> = std::fs::read_to_string(&corrected)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[2]["concepts"]["Deny Changes"], 0);
    assert_eq!(rows[2]["original_decision"], 1);
    assert_eq!(rows[2]["corrected_decision"], 0);
    assert_eq!(rows[0]["edits"], 0);
}

#[test]
fn replay_rejects_a_model_for_another_schema() {
    let dir = tempfile::tempdir().unwrap();
    let session = recorded_session(dir.path());
    let mut model = serde_json::to_value(fixtures::fixture_model()).unwrap();
    model["schema_version"] = "other-v9".into();
    let path = dir.path().join("other.json");
    std::fs::write(&path, model.to_string()).unwrap();
    let out = cofac(&["replay", "--session-log", p(&session), "--model", p(&path)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn serve_on_a_busy_port_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let busy = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = busy.local_addr().unwrap().port().to_string();
    let out = cofac(&[
        "serve",
        "--port",
        &port,
        "--data-dir",
        p(&dir.path().join("data")),
        "--models-dir",
        p(&dir.path().join("models")),
        "--demo",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot bind"));
}

#[test]
fn serve_rejects_a_bad_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("service.json");
    std::fs::write(&cfg, r#"{"port": 1, "colour": "blue"}"#).unwrap();
    let out = cofac(&["--config", p(&cfg), "serve"]);
    assert_eq!(out.status.code(), Some(1));
}
