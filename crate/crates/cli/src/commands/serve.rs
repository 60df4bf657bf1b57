use std::path::{Path, PathBuf};

use cofac_core::fixtures;
use cofac_service::{AppState, BackendMode, ServiceConfig, StartupError, StateOptions};

use crate::error::{CliError, CliResult, UserContext};

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    bind: Option<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    models_dir: Option<PathBuf>,
    /// Use the rule-based mock backend.
    #[arg(long)]
    mock: bool,
    /// Register the bundled demo model as `fixture`.
    #[arg(long)]
    demo: bool,
}

pub fn run(args: Args, config: Option<&Path>) -> CliResult {
    let mut cfg = match config {
        Some(p) => ServiceConfig::load(p).user("config")?,
        None => ServiceConfig::default(),
    };
    cfg = cfg.apply_env().user("environment")?;
    if let Some(p) = args.port {
        cfg.port = p;
    }
    if let Some(b) = args.bind {
        cfg.bind = b;
    }
    if let Some(d) = args.data_dir {
        cfg.data_dir = d;
    }
    if let Some(d) = args.models_dir {
        cfg.models_dir = d;
    }
    if args.mock || args.demo {
        cfg.backend = BackendMode::Mock;
    }

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Internal(format!("runtime: {e}")))?;
    runtime.block_on(async {
        let state = AppState::from_config(cfg, StateOptions::default()).map_err(startup_error)?;
        if args.demo {
            state.register_model("fixture", fixtures::fixture_model_for(state.schema()));
        }
        eprintln!(
            "cofac listening on http://{}:{}{}",
            state.config().bind,
            state.config().port,
            state.config().base_path
        );
        cofac_service::run(state).await.map_err(startup_error)
    })
}

fn startup_error(e: StartupError) -> CliError {
    match e {
        StartupError::Serve(_) => CliError::Internal(e.to_string()),
        other => CliError::User(other.to_string()),
    }
}
