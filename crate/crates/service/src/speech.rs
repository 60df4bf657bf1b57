use std::io::Write;
use std::process::{Command, Stdio};

/// Hands speech payloads to an external synthesizer command on stdin.
#[derive(Debug, Clone)]
pub struct SpeechHook {
    command: String,
}

impl SpeechHook {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
        }
    }

    /// Starts the command without waiting for it; false if it could not be spawned.
    pub fn deliver(&self, text: &str) -> bool {
        let child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn();
        let mut child = match child {
            Ok(c) => c,
            Err(e) => {
                tracing::warn!(error = %e, "speech hook failed to start");
                return false;
            }
        };
        let payload = text.to_string();
        std::thread::spawn(move || {
            if let Some(mut stdin) = child.stdin.take() {
                let _ = stdin.write_all(payload.as_bytes());
            }
            match child.wait() {
                Ok(status) if !status.success() => tracing::warn!(%status, "speech hook exited with failure"),
                Err(e) => tracing::warn!(error = %e, "speech hook wait failed"),
                _ => {}
            }
        });
        true
    }
}
