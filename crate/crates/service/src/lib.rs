//! HTTP service for live sessions.
//!
//! Segments are posted as they are transcribed; each is scored, predicted
//! and, when the model fires, turned into a suggestion that is pushed to the
//! facilitator over server-sent events. All state lives in per-session JSON
//! Lines files and is reloaded on start.

pub mod config;
pub mod error;
pub mod events;
pub mod model;
pub mod routes;
pub mod session;
pub mod speech;
pub mod state;

pub use config::{BackendMode, ServiceConfig};
pub use error::ServiceError;
pub use routes::router;
pub use state::{AppState, IdSource, RandomIds, SequentialIds, StartupError, StateOptions};

/// Binds the configured address and serves until ctrl-c.
pub async fn run(state: AppState) -> Result<(), StartupError> {
    let addr = format!("{}:{}", state.config().bind, state.config().port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|source| StartupError::Bind { addr: addr.clone(), source })?;
    tracing::info!(%addr, base_path = %state.config().base_path, "listening");
    serve(state, listener, shutdown_signal()).await
}

pub async fn serve(
    state: AppState,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), StartupError> {
    let app = router(state.clone());
    axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            shutdown.await;
            state.begin_shutdown();
        })
        .await
        .map_err(StartupError::Serve)
}

async fn shutdown_signal() {
    if tokio::signal::ctrl_c().await.is_err() {
        std::future::pending::<()>().await;
    }
}
