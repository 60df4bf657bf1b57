//! Language-model backends shared by the extractor, summarizer and advisor.
//!
//! Prompts mark their inputs with XML-style sections (`<transcript>...</transcript>`)
//! so the deterministic mock can find the transcript without parsing prose.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Extraction,
    Summary,
    Advice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub task: Task,
    pub system: String,
    pub prompt: String,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BackendDescriptor {
    pub name: String,
    pub supports_structured_output: bool,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend misconfigured: {0}")]
    Config(String),
}

pub trait LanguageBackend: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;
}

impl<B: LanguageBackend + ?Sized> LanguageBackend for Arc<B> {
    fn descriptor(&self) -> BackendDescriptor {
        (**self).descriptor()
    }
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

/// Contents of the first `<tag>...</tag>` section of a prompt.
pub fn prompt_section<'a>(prompt: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = prompt.find(&open)? + open.len();
    let end = prompt[start..].find(&close)? + start;
    Some(prompt[start..end].trim_matches('\n'))
}

pub fn section(tag: &str, body: &str) -> String {
    format!("<{tag}>\n{body}\n</{tag}>")
}

/// Hex SHA-256, used wherever transcript text would otherwise reach a log.
pub fn text_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Extracts the first JSON object embedded in free text.
pub fn first_json_object(raw: &str) -> Option<serde_json::Map<String, serde_json::Value>> {
    raw.char_indices().filter(|&(_, c)| c == '{').find_map(|(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&raw[i..]).into_iter::<serde_json::Value>();
        match stream.next() {
            Some(Ok(serde_json::Value::Object(map))) => Some(map),
            _ => None,
        }
    })
}

/// Wraps a closure as a backend. Used for scripted replies in tests and demos.
pub struct FnBackend<F> {
    name: String,
    f: F,
}

impl<F> FnBackend<F>
where
    F: Fn(&CompletionRequest) -> Result<String, BackendError> + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self { name: name.into(), f }
    }
}

impl<F> LanguageBackend for FnBackend<F>
where
    F: Fn(&CompletionRequest) -> Result<String, BackendError> + Send + Sync,
{
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            name: self.name.clone(),
            supports_structured_output: true,
        }
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (self.f)(request)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptRule {
    pub pattern: String,
    pub concept: String,
    pub value: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdviceRule {
    pub pattern: String,
    pub category: String,
    pub action: String,
    pub rationale: String,
}

/// Rule tables driving [`MockBackend`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleTable {
    pub concepts: Vec<ConceptRule>,
    #[serde(default)]
    pub advice: Vec<AdviceRule>,
}

impl RuleTable {
    /// Reads a concept rule file: `[{pattern, concept, value}]`.
    pub fn load_concept_rules(path: &Path) -> Result<Vec<ConceptRule>, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))
    }

    /// Reads an advice rule file: `[{pattern, category, action, rationale}]`.
    pub fn load_advice_rules(path: &Path) -> Result<Vec<AdviceRule>, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))
    }

    /// Concept assignments for a transcript: every case-insensitive match, max value per concept.
    pub fn match_concepts(&self, transcript: &str) -> BTreeMap<String, i64> {
        let haystack = transcript.to_lowercase();
        let mut out: BTreeMap<String, i64> = BTreeMap::new();
        for rule in &self.concepts {
            if haystack.contains(&rule.pattern.to_lowercase()) {
                out.entry(rule.concept.clone())
                    .and_modify(|v| *v = (*v).max(rule.value))
                    .or_insert(rule.value);
            }
        }
        out
    }

    pub fn match_advice(&self, transcript: &str) -> Option<&AdviceRule> {
        let haystack = transcript.to_lowercase();
        self.advice
            .iter()
            .find(|r| haystack.contains(&r.pattern.to_lowercase()))
    }
}

/// Deterministic offline backend.
///
/// Extraction replies with a JSON object of matched concept rules. Summary
/// replies with `PREV | NEW`, NEW being the transcript collapsed to one line.
/// Advice replies with the first matching advice rule, or a generic check-in.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    rules: RuleTable,
}

pub fn mock_backend(rules: RuleTable) -> MockBackend {
    MockBackend { rules }
}

impl MockBackend {
    pub fn rules(&self) -> &RuleTable {
        &self.rules
    }
}

impl LanguageBackend for MockBackend {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            name: "mock".into(),
            supports_structured_output: true,
        }
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let transcript = prompt_section(&request.prompt, "transcript").unwrap_or("");
        match request.task {
            Task::Extraction => {
                let matched = self.rules.match_concepts(transcript);
                Ok(serde_json::to_string(&matched).expect("map serializes"))
            }
            Task::Summary => {
                let prev = prompt_section(&request.prompt, "previous_summary").unwrap_or("");
                let new = transcript.split_whitespace().collect::<Vec<_>>().join(" ");
                Ok(match (prev.is_empty(), new.is_empty()) {
                    (true, _) => new,
                    (false, true) => prev.to_string(),
                    (false, false) => format!("{prev} | {new}"),
                })
            }
            Task::Advice => {
                let reply = match self.rules.match_advice(transcript) {
                    Some(rule) => serde_json::json!({
                        "category": rule.category,
                        "action": rule.action,
                        "rationale": rule.rationale,
                    }),
                    None => serde_json::json!({
                        "category": "other",
                        "action": "Check in with the group about how the discussion is going",
                        "rationale": "The classifier flagged this segment and no scripted advice matched it.",
                    }),
                };
                Ok(reply.to_string())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteConfig {
    pub base_url: String,
    pub api_key: String,
    pub model: String,
    /// Retries after the first attempt.
    pub retries: u32,
    /// Total time budget across attempts.
    pub budget: Duration,
}

pub const ENV_BACKEND_URL: &str = "COFAC_BACKEND_URL";
pub const ENV_BACKEND_KEY: &str = "COFAC_BACKEND_KEY";
pub const ENV_BACKEND_MODEL: &str = "COFAC_BACKEND_MODEL";

impl RemoteConfig {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: api_key.into(),
            model: model.into(),
            retries: 2,
            budget: Duration::from_secs(20),
        }
    }

    pub fn from_env() -> Result<Self, BackendError> {
        let key = std::env::var(ENV_BACKEND_KEY)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| BackendError::Config(format!("{ENV_BACKEND_KEY} is not set")))?;
        let url = std::env::var(ENV_BACKEND_URL).unwrap_or_else(|_| "https://api.openai.com/v1".into());
        let model = std::env::var(ENV_BACKEND_MODEL).unwrap_or_else(|_| "gpt-4".into());
        Ok(Self::new(url, key, model))
    }
}

/// Chat-completion style HTTP backend.
pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.budget)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self { config, client })
    }

    fn body(&self, request: &CompletionRequest) -> serde_json::Value {
        let mut body = serde_json::json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.prompt},
            ],
        });
        if let Some(seed) = request.seed {
            body["seed"] = seed.into();
        }
        if matches!(request.task, Task::Extraction | Task::Advice) {
            body["response_format"] = serde_json::json!({"type": "json_object"});
        }
        body
    }

    fn attempt(&self, body: &serde_json::Value, timeout: Duration) -> Result<String, String> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let resp = self
            .client
            .post(url)
            .bearer_auth(&self.config.api_key)
            .timeout(timeout)
            .json(body)
            .send()
            .map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("HTTP {status}"));
        }
        let value: serde_json::Value = resp.json().map_err(|e| e.to_string())?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| "response has no choices[0].message.content".to_string())
    }
}

impl LanguageBackend for RemoteBackend {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            name: format!("remote:{}", self.config.model),
            supports_structured_output: true,
        }
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let transcript_hash = text_hash(prompt_section(&request.prompt, "transcript").unwrap_or(""));
        let body = self.body(request);
        let deadline = Instant::now() + self.config.budget;
        let mut backoff = Duration::from_millis(500);
        let mut last_err = String::new();
        for attempt in 0..=self.config.retries {
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                break;
            }
            match self.attempt(&body, remaining) {
                Ok(content) => {
                    if request.task == Task::Extraction {
                        tracing::debug!(task = ?request.task, transcript_sha256 = %transcript_hash, response = %content, "backend reply");
                    } else {
                        tracing::debug!(task = ?request.task, transcript_sha256 = %transcript_hash, response_sha256 = %text_hash(&content), "backend reply");
                    }
                    return Ok(content);
                }
                Err(e) => {
                    tracing::warn!(attempt, transcript_sha256 = %transcript_hash, error = %e, "backend attempt failed");
                    last_err = e;
                }
            }
            if attempt < self.config.retries {
                let remaining = deadline.saturating_duration_since(Instant::now());
                std::thread::sleep(backoff.min(remaining));
                backoff *= 2;
            }
        }
        Err(BackendError::Unavailable(last_err))
    }
}
