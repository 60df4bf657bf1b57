mod common;

use std::sync::Arc;

use cofac_core::backend::{mock_backend, BackendError, FnBackend, LanguageBackend, Task};
use cofac_core::fixtures;
use common::{create_body, demo_segment, options, TestServer};
use serde_json::{json, Value};

#[tokio::test]
async fn session_creation() {
    let dir = tempfile::tempdir().unwrap();
    let srv = TestServer::mock(dir.path()).await;
    let a = srv.create().await;
    let b = srv.create().await;
    assert_ne!(a, b);

    let (status, body) = srv.post("/sessions", create_body("nope")).await;
    assert_eq!(status, 404);
    assert_eq!(body["error"], "unknown_model");

    let mut bad = create_body("fixture");
    bad["stage_goals"]["session_number"] = json!(7);
    assert_eq!(srv.post("/sessions", bad).await.0, 422);
    assert_eq!(srv.post("/sessions", json!({"model_ref": "fixture"})).await.0, 422);

    let (status, timeline) = srv.get(&format!("/sessions/{a}/timeline")).await;
    assert_eq!((status, timeline), (200, json!([])));
    assert_eq!(srv.get("/sessions/missing/timeline").await.0, 404);
    let (_, view) = srv.get(&format!("/sessions/{a}")).await;
    assert_eq!(view["status"], "active");
    srv.stop().await;
}

#[tokio::test]
async fn ingest_decisions_and_views() {
    let dir = tempfile::tempdir().unwrap();
    let srv = TestServer::mock(dir.path()).await;
    let id = srv.create().await;
    let path = format!("/sessions/{id}/segments");

    let (status, a0) = srv.post(&path, demo_segment(0)).await;
    assert_eq!(status, 200, "{a0}");
    assert_eq!(a0["decision"], 0);
    assert!(a0["suggestion"].is_null());

    let (status, a1) = srv.post(&path, demo_segment(1)).await;
    assert_eq!(status, 200);
    assert_eq!(a1["decision"], 1);
    assert_eq!(a1["suggestion"]["category"], "other");
    assert_eq!(a1["notification"]["delivered_via"], json!(["text"]));

    let (_, a2) = srv.post(&path, demo_segment(2)).await;
    assert_eq!(a2["suggestion"]["action"], "Steer the conversation towards reviewing progress");

    let (_, timeline) = srv.get(&format!("/sessions/{id}/timeline")).await;
    let idx: Vec<u64> = timeline.as_array().unwrap().iter().map(|a| a["index"].as_u64().unwrap()).collect();
    assert_eq!(idx, vec![0, 1, 2]);

    let (_, summary) = srv.get(&format!("/sessions/{id}/summary")).await;
    assert_eq!(summary["as_of_segment"], 2);
    assert!(summary["text"].as_str().unwrap().contains("hurricane"));
    srv.stop().await;
}

#[tokio::test]
async fn ordering_and_closing() {
    let dir = tempfile::tempdir().unwrap();
    let srv = TestServer::mock(dir.path()).await;
    let id = srv.create().await;
    let path = format!("/sessions/{id}/segments");
    assert_eq!(srv.post(&path, demo_segment(0)).await.0, 200);

    // skipping a window
    let (status, body) = srv.post(&path, demo_segment(2)).await;
    assert_eq!(status, 409);
    assert_eq!(body["error"], "out_of_order_segment");
    // replaying the same window
    assert_eq!(srv.post(&path, demo_segment(0)).await.0, 409);
    // within the ±1 s tolerance
    let mut seg = demo_segment(1);
    seg["t0"] = json!(60.8);
    seg["t1"] = json!(120.5);
    assert_eq!(srv.post(&path, seg).await.0, 200);
    // wrong length
    let bad = json!({"t0": 120.5, "t1": 200.0, "utterances": []});
    assert_eq!(srv.post(&path, bad).await.0, 422);

    let (status, view) = srv.post(&format!("/sessions/{id}/close"), json!({})).await;
    assert_eq!((status, view["status"].as_str()), (200, Some("closed")));
    let next = json!({"t0": 120.5, "t1": 180.5, "utterances": []});
    assert_eq!(srv.post(&path, next).await.0, 410);
    assert_eq!(srv.post(&format!("/sessions/{id}/close"), json!({})).await.0, 200);
    srv.stop().await;
}

#[tokio::test]
async fn edits_and_acknowledgements() {
    let dir = tempfile::tempdir().unwrap();
    let srv = TestServer::mock(dir.path()).await;
    let id = srv.create().await;
    let path = format!("/sessions/{id}/segments");
    for i in 0..3 {
        srv.post(&path, demo_segment(i)).await;
    }
    let edits = format!("/sessions/{id}/segments/2/edits");

    // segment 2 fired on Deny Changes = 5
    let (status, out) = srv
        .post(&edits, json!({"concept": "Deny Changes", "old_value": 5, "new_value": 0}))
        .await;
    assert_eq!(status, 200, "{out}");
    assert_eq!(out["flipped"], true);
    assert_eq!((out["decision_before"].as_u64(), out["decision_after"].as_u64()), (Some(1), Some(0)));
    assert_eq!(out["edit"]["editor"], "facilitator");

    let (status, body) = srv
        .post(&edits, json!({"concept": "Deny Changes", "old_value": 5, "new_value": 1}))
        .await;
    assert_eq!((status, body["stored_value"].as_i64()), (409, Some(0)));
    assert_eq!(
        srv.post(&edits, json!({"concept": "Nope", "old_value": 0, "new_value": 1})).await.0,
        422
    );
    assert_eq!(
        srv.post(&edits, json!({"concept": "Sad", "old_value": 0, "new_value": 9})).await.0,
        422
    );
    assert_eq!(
        srv.post(&format!("/sessions/{id}/segments/9/edits"), json!({"concept": "Sad", "old_value": 0, "new_value": 1}))
            .await
            .0,
        404
    );

    // turning segment 0 on with advice requested produces a suggestion
    let (status, out) = srv
        .post(
            &format!("/sessions/{id}/segments/0/edits"),
            json!({"concept": "Privacy Issue", "old_value": 0, "new_value": 1, "request_advice": true}),
        )
        .await;
    assert_eq!(status, 200);
    assert_eq!(out["decision_after"], 1);
    assert!(out["suggestion"]["action"].is_string());

    let (_, timeline) = srv.get(&format!("/sessions/{id}/timeline")).await;
    let t = timeline.as_array().unwrap();
    assert_eq!(t[2]["current_decision"], 0);
    assert_eq!(t[2]["decision"], 1);
    assert_eq!(t[2]["edits"].as_array().unwrap().len(), 1);
    assert!(t[0]["suggestion"].is_object());

    let ack = format!("/sessions/{id}/segments/1/ack");
    let (status, a) = srv.post(&ack, json!({"state": "acknowledged"})).await;
    assert_eq!((status, a["ack"].as_str()), (200, Some("acknowledged")));
    // segment 0 had no suggestion at ingest but has one now
    assert_eq!(srv.post(&format!("/sessions/{id}/segments/0/ack"), json!({"state": "dismissed"})).await.0, 200);
    srv.stop().await;
}

#[tokio::test]
async fn feature_report_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let srv = TestServer::mock(dir.path()).await;
    let (status, rows) = srv.get("/models/fixture/features").await;
    assert_eq!(status, 200);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 14);
    for r in rows {
        let c = r["coefficient"].as_f64().unwrap();
        assert!((r["odds_ratio"].as_f64().unwrap() - c.exp()).abs() < 1e-12);
    }
    assert_eq!(rows[0]["concept"], "Privacy Issue");
    assert_eq!(srv.get("/models/none/features").await.0, 404);
    let (_, models) = srv.get("/models").await;
    assert_eq!(models[0]["model_ref"], "fixture");
    let (_, schema) = srv.get("/schema").await;
    assert_eq!(schema["version"], "default-v1");
    srv.stop().await;
}

fn failing(task: Task) -> Arc<dyn LanguageBackend> {
    let mock = mock_backend(fixtures::mock_rules());
    Arc::new(FnBackend::new("flaky", move |req| {
        if req.task == task {
            Err(BackendError::Unavailable("down".into()))
        } else {
            mock.complete(req)
        }
    }))
}

#[tokio::test]
async fn extraction_failure_stores_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let srv = TestServer::start(common::config(dir.path()), options(Some(failing(Task::Extraction)))).await;
    let id = srv.create().await;
    let (status, body) = srv.post(&format!("/sessions/{id}/segments"), demo_segment(0)).await;
    assert_eq!((status, body["error"].as_str()), (502, Some("backend_unavailable")));
    assert_eq!(srv.get(&format!("/sessions/{id}/timeline")).await.1, json!([]));
    srv.stop().await;
}

#[tokio::test]
async fn advisor_failure_stores_degraded_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let srv = TestServer::start(common::config(dir.path()), options(Some(failing(Task::Advice)))).await;
    let id = srv.create().await;
    let path = format!("/sessions/{id}/segments");
    assert_eq!(srv.post(&path, demo_segment(0)).await.0, 200);
    let (status, body) = srv.post(&path, demo_segment(1)).await;
    assert_eq!(status, 502);
    assert_eq!(body["analysis"]["degraded"], json!(["advisor_unavailable"]));
    let (_, timeline) = srv.get(&format!("/sessions/{id}/timeline")).await;
    let t: &Vec<Value> = timeline.as_array().unwrap();
    assert_eq!(t.len(), 2);
    assert_eq!(t[1]["decision"], 1);
    assert!(t[1]["suggestion"].is_null());
    // the session keeps going
    assert_eq!(srv.post(&path, demo_segment(2)).await.0, 502);
    assert_eq!(srv.post(&path, demo_segment(3)).await.0, 502);
    assert_eq!(srv.post(&path, demo_segment(4)).await.0, 200);
    srv.stop().await;
}

#[tokio::test]
async fn api_key_and_base_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::config(dir.path());
    cfg.api_key = Some("secret".into());
    cfg.base_path = "/api".into();
    let srv = TestServer::start(cfg, options(None)).await;
    assert!(srv.base.ends_with("/api"));
    assert_eq!(srv.get("/health").await.0, 401);
    let r = srv
        .client
        .get(srv.url("/health"))
        .header("x-api-key", "secret")
        .send()
        .await
        .unwrap();
    assert_eq!(r.status().as_u16(), 200);
    let r = srv.client.get(srv.url("/health?api_key=secret")).send().await.unwrap();
    assert_eq!(r.status().as_u16(), 200);
    srv.stop().await;
}
