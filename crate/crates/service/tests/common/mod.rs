#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use chrono::{TimeZone, Utc};
use cofac_core::backend::LanguageBackend;
use cofac_core::clock::SteppingClock;
use cofac_core::fixtures;
use cofac_service::{AppState, SequentialIds, ServiceConfig, StateOptions};
use cofac_testkit::sse::{Frame, Parser};
use serde_json::{json, Value};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub struct TestServer {
    pub base: String,
    pub client: reqwest::Client,
    pub state: AppState,
    stop: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<()>>,
}

pub fn config(root: &Path) -> ServiceConfig {
    ServiceConfig {
        data_dir: root.join("data"),
        models_dir: root.join("models"),
        ..ServiceConfig::default()
    }
}

pub fn options(backend: Option<Arc<dyn LanguageBackend>>) -> StateOptions {
    StateOptions {
        clock: Arc::new(SteppingClock::new(Utc.timestamp_opt(1_700_000_000, 0).unwrap(), 250)),
        ids: Arc::new(SequentialIds::new("s")),
        backend,
    }
}

impl TestServer {
    pub async fn start(config: ServiceConfig, opts: StateOptions) -> Self {
        let state = AppState::from_config(config, opts).expect("state");
        if state.model("fixture").is_err() {
            state.register_model("fixture", fixtures::fixture_model());
        }
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let (tx, rx) = oneshot::channel::<()>();
        let st = state.clone();
        let task = tokio::spawn(async move {
            cofac_service::serve(st, listener, async {
                let _ = rx.await;
            })
            .await
            .unwrap();
        });
        let base = format!("http://{addr}{}", state.config().base_path);
        Self {
            base,
            client: reqwest::Client::new(),
            state,
            stop: Some(tx),
            task: Some(task),
        }
    }

    pub async fn mock(root: &Path) -> Self {
        Self::start(config(root), options(None)).await
    }

    pub async fn stop(mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.task.take() {
            let _ = tokio::time::timeout(Duration::from_secs(5), t).await;
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let r = self.client.post(self.url(path)).json(&body).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    pub async fn get(&self, path: &str) -> (u16, Value) {
        let r = self.client.get(self.url(path)).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    pub async fn create(&self) -> String {
        let (status, body) = self.post("/sessions", create_body("fixture")).await;
        assert_eq!(status, 201, "{body}");
        body["session_id"].as_str().unwrap().to_string()
    }

    /// Opens the event stream, optionally resuming after `last_id`.
    pub async fn subscribe(&self, session: &str, last_id: Option<u64>) -> EventStream {
        let mut req = self.client.get(self.url(&format!("/sessions/{session}/events")));
        if let Some(id) = last_id {
            req = req.header("Last-Event-ID", id.to_string());
        }
        let resp = req.send().await.unwrap();
        assert_eq!(resp.status().as_u16(), 200);
        EventStream {
            resp,
            parser: Parser::default(),
            pending: Vec::new(),
        }
    }
}

pub struct EventStream {
    resp: reqwest::Response,
    parser: Parser,
    pending: Vec<Frame>,
}

impl EventStream {
    /// Next frame, or `None` when the server closed the stream or the timeout elapsed.
    pub async fn next(&mut self, timeout: Duration) -> Option<Frame> {
        loop {
            if !self.pending.is_empty() {
                return Some(self.pending.remove(0));
            }
            match tokio::time::timeout(timeout, self.resp.chunk()).await {
                Ok(Ok(Some(bytes))) => self.pending.extend(self.parser.push(&bytes)),
                _ => return None,
            }
        }
    }

    pub async fn take(&mut self, n: usize) -> Vec<Frame> {
        let mut out = Vec::new();
        while out.len() < n {
            match self.next(Duration::from_secs(5)).await {
                Some(f) => out.push(f),
                None => break,
            }
        }
        out
    }
}

pub fn create_body(model: &str) -> Value {
    json!({ "stage_goals": fixtures::demo_goals(), "model_ref": model })
}

/// Request body for segment `i` of the scripted session.
pub fn demo_segment(i: usize) -> Value {
    let s = &fixtures::demo_segments("x")[i];
    json!({ "t0": s.t0_s, "t1": s.t1_s, "utterances": s.utterances })
}

pub fn session_dir(root: &Path, id: &str) -> PathBuf {
    root.join("data").join("sessions").join(id)
}
