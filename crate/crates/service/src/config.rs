use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_DATA_DIR: &str = "COFAC_DATA_DIR";
pub const ENV_MODELS_DIR: &str = "COFAC_MODELS_DIR";
pub const ENV_PORT: &str = "COFAC_PORT";
pub const ENV_BASE_PATH: &str = "COFAC_BASE_PATH";
pub const ENV_API_KEY: &str = "COFAC_API_KEY";
/// `1`/`true` selects the mock backend, `0`/`false` the remote one.
pub const ENV_MOCK: &str = "COFAC_MOCK";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {path}: {reason}")]
    File { path: String, reason: String },
    #[error("{var}: {reason}")]
    Env { var: &'static str, reason: String },
    #[error("base path `{0}` must start with `/` and not end with one")]
    BasePath(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub models_dir: PathBuf,
    pub bind: String,
    pub port: u16,
    /// Prefix for every route, e.g. `/api`; empty for none.
    pub base_path: String,
    /// When set, requests must carry it in `x-api-key` (or `?api_key=`).
    pub api_key: Option<String>,
    pub backend: BackendMode,
    /// Mock rule table; the bundled one when absent.
    pub mock_rules: Option<PathBuf>,
    pub fewshot: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    /// Shell command receiving speech payloads on stdin.
    pub speech_command: Option<String>,
    pub summary_budget_chars: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            models_dir: PathBuf::from("models"),
            bind: "127.0.0.1".into(),
            port: 8080,
            base_path: String::new(),
            api_key: None,
            backend: BackendMode::Mock,
            mock_rules: None,
            fewshot: None,
            schema: None,
            speech_command: None,
            summary_budget_chars: cofac_core::summary::DEFAULT_BUDGET_CHARS,
        }
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let err = |reason: String| ConfigError::File {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }

    /// Overrides fields from the process environment.
    pub fn apply_env(self) -> Result<Self, ConfigError> {
        self.apply_vars(|k| std::env::var(k).ok())
    }

    pub fn apply_vars(mut self, get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        if let Some(v) = get(ENV_DATA_DIR) {
            self.data_dir = v.into();
        }
        if let Some(v) = get(ENV_MODELS_DIR) {
            self.models_dir = v.into();
        }
        if let Some(v) = get(ENV_PORT) {
            self.port = v.parse().map_err(|e: std::num::ParseIntError| ConfigError::Env {
                var: ENV_PORT,
                reason: e.to_string(),
            })?;
        }
        if let Some(v) = get(ENV_BASE_PATH) {
            self.base_path = v;
        }
        if let Some(v) = get(ENV_API_KEY).filter(|v| !v.is_empty()) {
            self.api_key = Some(v);
        }
        if let Some(v) = get(ENV_MOCK) {
            self.backend = match v.to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" => BackendMode::Mock,
                "0" | "false" | "no" => BackendMode::Remote,
                other => {
                    return Err(ConfigError::Env {
                        var: ENV_MOCK,
                        reason: format!("expected 1/0, got `{other}`"),
                    })
                }
            };
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.base_path;
        if !p.is_empty() && (!p.starts_with('/') || p.ends_with('/')) {
            return Err(ConfigError::BasePath(p.clone()));
        }
        Ok(())
    }

    pub fn sessions_dir(&self) -> PathBuf {
        self.data_dir.join("sessions")
    }
}
