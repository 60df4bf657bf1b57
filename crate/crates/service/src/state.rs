use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use cofac_core::advisor::load_fewshot;
use cofac_core::backend::{mock_backend, LanguageBackend, RemoteBackend, RemoteConfig, RuleTable};
use cofac_core::classifier::{load_model, CbmModel, LoadOptions};
use cofac_core::clock::{Clock, SystemClock};
use cofac_core::schema::{default_schema, ConceptSchema};
use cofac_core::{fixtures, StageGoals};
use thiserror::Error;
use tokio::sync::Mutex;

use crate::config::{BackendMode, ServiceConfig};
use crate::error::ServiceError;
use crate::events::EventHub;
use crate::model::{SessionMeta, SessionStatus};
use crate::session::{Pipeline, Session};
use crate::speech::SpeechHook;

#[derive(Debug, Error)]
pub enum StartupError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("{0}")]
    Setup(String),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server: {0}")]
    Serve(std::io::Error),
    #[error("session {path}: {source}")]
    Session {
        path: String,
        #[source]
        source: ServiceError,
    },
}

pub trait IdSource: Send + Sync {
    fn next_id(&self) -> String;
}

#[derive(Debug, Default)]
pub struct RandomIds;

impl IdSource for RandomIds {
    fn next_id(&self) -> String {
        uuid::Uuid::new_v4().simple().to_string()
    }
}

/// `prefix-1`, `prefix-2`, ... for reproducible runs.
#[derive(Debug)]
pub struct SequentialIds {
    prefix: String,
    next: AtomicU64,
}

impl SequentialIds {
    pub fn new(prefix: impl Into<String>) -> Self {
        Self {
            prefix: prefix.into(),
            next: AtomicU64::new(1),
        }
    }
}

impl IdSource for SequentialIds {
    fn next_id(&self) -> String {
        format!("{}-{}", self.prefix, self.next.fetch_add(1, Ordering::SeqCst))
    }
}

/// Replaceable collaborators; defaults are the production ones.
pub struct StateOptions {
    pub clock: Arc<dyn Clock>,
    pub ids: Arc<dyn IdSource>,
    /// Overrides the backend chosen by the config.
    pub backend: Option<Arc<dyn LanguageBackend>>,
}

impl Default for StateOptions {
    fn default() -> Self {
        Self {
            clock: Arc::new(SystemClock),
            ids: Arc::new(RandomIds),
            backend: None,
        }
    }
}

#[derive(Clone)]
pub struct SessionEntry {
    pub id: String,
    pub session: Arc<Mutex<Session>>,
    pub hub: Arc<EventHub>,
}

struct Inner {
    config: ServiceConfig,
    pipeline: Arc<Pipeline>,
    models: RwLock<BTreeMap<String, Arc<CbmModel>>>,
    sessions: RwLock<BTreeMap<String, SessionEntry>>,
    ids: Arc<dyn IdSource>,
    shutdown: tokio::sync::watch::Sender<bool>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

fn setup<E: std::fmt::Display>(what: &str) -> impl FnOnce(E) -> StartupError + '_ {
    move |e| StartupError::Setup(format!("{what}: {e}"))
}

impl AppState {
    /// Loads schema, backend, few-shot examples, models and persisted sessions.
    pub fn from_config(config: ServiceConfig, opts: StateOptions) -> Result<Self, StartupError> {
        config.validate()?;
        let schema = match &config.schema {
            Some(p) => ConceptSchema::load(p).map_err(setup("schema"))?,
            None => default_schema(),
        };
        let fewshot = match &config.fewshot {
            Some(p) => load_fewshot(p).map_err(setup("few-shot"))?,
            None => fixtures::fewshot(),
        };
        let backend: Arc<dyn LanguageBackend> = match (opts.backend, config.backend) {
            (Some(b), _) => b,
            (None, BackendMode::Mock) => {
                let rules = match &config.mock_rules {
                    Some(p) => load_rule_table(p)?,
                    None => fixtures::mock_rules(),
                };
                Arc::new(mock_backend(rules))
            }
            (None, BackendMode::Remote) => {
                let rc = RemoteConfig::from_env().map_err(setup("remote backend"))?;
                Arc::new(RemoteBackend::new(rc).map_err(setup("remote backend"))?)
            }
        };
        let pipeline = Arc::new(Pipeline {
            schema,
            backend,
            fewshot,
            clock: opts.clock,
            speech: config.speech_command.clone().map(SpeechHook::new),
            summary_budget: config.summary_budget_chars,
        });
        let state = AppState(Arc::new(Inner {
            pipeline,
            models: RwLock::new(BTreeMap::new()),
            sessions: RwLock::new(BTreeMap::new()),
            ids: opts.ids,
            shutdown: tokio::sync::watch::channel(false).0,
            config,
        }));
        state.load_models();
        state.load_sessions()?;
        Ok(state)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.0.config
    }

    /// Tells long-lived responses (event streams) to finish.
    pub fn begin_shutdown(&self) {
        self.0.shutdown.send_replace(true);
    }

    /// Resolves once [`Self::begin_shutdown`] has been called.
    pub fn shutting_down(&self) -> impl std::future::Future<Output = ()> + Send + 'static {
        let mut rx = self.0.shutdown.subscribe();
        async move {
            let _ = rx.wait_for(|&v| v).await;
        }
    }

    pub fn pipeline(&self) -> Arc<Pipeline> {
        Arc::clone(&self.0.pipeline)
    }

    pub fn schema(&self) -> &ConceptSchema {
        &self.0.pipeline.schema
    }

    fn load_models(&self) {
        let dir = &self.0.config.models_dir;
        let entries = match std::fs::read_dir(dir) {
            Ok(e) => e,
            Err(e) => {
                tracing::warn!(dir = %dir.display(), error = %e, "no models directory");
                return;
            }
        };
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| is_model_file(p))
            .collect();
        paths.sort();
        let opts = LoadOptions {
            expected_schema_version: Some(self.schema().version().to_string()),
            allow_schema_mismatch: false,
        };
        for path in paths {
            let Some(model_ref) = path.file_stem().and_then(|s| s.to_str()).map(String::from) else {
                continue;
            };
            match load_model(&path, &opts).and_then(|m| m.check_schema(self.schema()).map(|_| m)) {
                Ok(m) => self.register_model(model_ref, m),
                Err(e) => tracing::warn!(path = %path.display(), error = %e, "skipping model"),
            }
        }
    }

    /// Adds or replaces a model under `model_ref`.
    pub fn register_model(&self, model_ref: impl Into<String>, model: CbmModel) {
        let model_ref = model_ref.into();
        tracing::info!(%model_ref, "model registered");
        write(&self.0.models).insert(model_ref, Arc::new(model));
    }

    pub fn model(&self, model_ref: &str) -> Result<Arc<CbmModel>, ServiceError> {
        read(&self.0.models)
            .get(model_ref)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownModel(model_ref.to_string()))
    }

    pub fn model_refs(&self) -> Vec<(String, Arc<CbmModel>)> {
        read(&self.0.models).iter().map(|(k, v)| (k.clone(), Arc::clone(v))).collect()
    }

    fn load_sessions(&self) -> Result<(), StartupError> {
        let dir = self.0.config.sessions_dir();
        let entries = match std::fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
            Err(e) => return Err(StartupError::Setup(format!("{}: {e}", dir.display()))),
        };
        let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for path in paths.into_iter().filter(|p| p.join("session.json").exists()) {
            let session = Session::open(path.clone(), self.schema()).map_err(|source| StartupError::Session {
                path: path.display().to_string(),
                source,
            })?;
            tracing::info!(session = %session.id(), segments = session.timeline().len(), "session reloaded");
            self.insert(session);
        }
        Ok(())
    }

    fn insert(&self, session: Session) -> SessionEntry {
        let id = session.id().to_string();
        let entry = SessionEntry {
            id: id.clone(),
            hub: session.hub(),
            session: Arc::new(Mutex::new(session)),
        };
        write(&self.0.sessions).insert(id, entry.clone());
        entry
    }

    pub fn session(&self, id: &str) -> Result<SessionEntry, ServiceError> {
        read(&self.0.sessions)
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    pub fn create_session(&self, goals: StageGoals, model_ref: String) -> Result<SessionEntry, ServiceError> {
        self.model(&model_ref)?;
        goals.validate().map_err(|e| ServiceError::InvalidGoals(e.to_string()))?;
        let sessions_dir = self.0.config.sessions_dir();
        let id = loop {
            let candidate = self.0.ids.next_id();
            let taken = read(&self.0.sessions).contains_key(&candidate) || sessions_dir.join(&candidate).exists();
            if !taken {
                break candidate;
            }
        };
        let meta = SessionMeta {
            session_id: id.clone(),
            stage_goals: goals,
            model_ref,
            status: SessionStatus::Active,
            created_at: self.0.pipeline.clock.now(),
            closed_at: None,
        };
        let session = Session::create(sessions_dir.join(&id), meta, self.schema())?;
        tracing::info!(session = %id, "session created");
        Ok(self.insert(session))
    }
}

fn is_model_file(p: &Path) -> bool {
    let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
    name.ends_with(".json") && !name.ends_with(".features.json") && p.is_file()
}

fn load_rule_table(path: &Path) -> Result<RuleTable, StartupError> {
    let text = std::fs::read_to_string(path).map_err(setup("mock rules"))?;
    serde_json::from_str(&text).map_err(setup("mock rules"))
}

fn read<T>(l: &RwLock<T>) -> std::sync::RwLockReadGuard<'_, T> {
    l.read().unwrap_or_else(|p| p.into_inner())
}

fn write<T>(l: &RwLock<T>) -> std::sync::RwLockWriteGuard<'_, T> {
    l.write().unwrap_or_else(|p| p.into_inner())
}
