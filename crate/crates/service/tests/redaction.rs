mod common;

use std::io::Write;
use std::sync::{Arc, Mutex};

use common::{demo_segment, TestServer};
use serde_json::json;

#[derive(Clone, Default)]
struct Capture(Arc<Mutex<Vec<u8>>>);

impl Write for Capture {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

#[tokio::test]
async fn logs_carry_no_transcript_text() {
    let capture = Capture::default();
    let writer = capture.clone();
    tracing_subscriber::fmt()
        .with_max_level(tracing::Level::DEBUG)
        .with_writer(move || writer.clone())
        .with_ansi(false)
        .init();

    let dir = tempfile::tempdir().unwrap();
    let srv = TestServer::mock(dir.path()).await;
    let id = srv.create().await;
    for i in 0..5 {
        srv.post(&format!("/sessions/{id}/segments"), demo_segment(i)).await;
    }
    srv.post(
        &format!("/sessions/{id}/segments/2/edits"),
        json!({"concept": "Deny Changes", "old_value": 5, "new_value": 0}),
    )
    .await;
    srv.stop().await;

    let logs = String::from_utf8(capture.0.lock().unwrap().clone()).unwrap();
    assert!(logs.contains("segment analysed"));
    assert!(logs.contains("transcript_sha256"));
    for lines in cofac_core::fixtures::SCRIPT {
        for (_, text) in lines.iter() {
            // any distinctive fragment of an utterance would be a leak
            let fragment: String = text.chars().take(20).collect();
            assert!(!logs.contains(&fragment), "leaked: {fragment}");
        }
    }
}
