use std::path::{Path, PathBuf};

use cofac_core::classifier::Hyperparams;
use cofac_core::schema::{default_schema, ConceptSchema};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, UserContext};

/// Shared settings, read from `--config` and overridden by flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub fewshot: Option<PathBuf>,
    pub mock_rules: Option<PathBuf>,
    pub hyperparams: Option<Hyperparams>,
    pub backend: Option<String>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).user(path.display())?;
        let cfg: RunConfig = serde_json::from_str(&text).user(path.display())?;
        for p in [&cfg.schema, &cfg.model, &cfg.fewshot, &cfg.mock_rules].into_iter().flatten() {
            if !p.exists() {
                return Err(CliError::User(format!("{}: referenced path {} does not exist", path.display(), p.display())));
            }
        }
        Ok(cfg)
    }
}

pub fn load_schema(path: Option<&Path>) -> CliResult<ConceptSchema> {
    match path {
        Some(p) => ConceptSchema::load(p).user(p.display()),
        None => Ok(default_schema()),
    }
}

pub fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::User(format!("{what} {} not found", path.display())))
    }
}
