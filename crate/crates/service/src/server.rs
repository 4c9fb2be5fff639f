//! Service startup and shutdown.

use std::io::Write;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use kbts_core::agent::{run_periodic, Agent, Fetcher, StopSignal};
use kbts_core::fuzzy::FuzzyEngine;
use kbts_core::rule_model::RuleError;
use kbts_core::RuleStore;
use thiserror::Error;
use tokio::net::TcpListener;

use crate::api::{router, AppState};
use crate::config::{ConfigError, ServiceConfig};
use crate::sessions::SessionRegistry;

#[derive(Debug, Error)]
pub enum StartupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot load rule base {path}: {source}")]
    RuleBase { path: String, source: RuleError },
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Serve(std::io::Error),
}

pub fn build_state(
    config: &ServiceConfig,
    fetcher: Arc<dyn Fetcher>,
) -> Result<Arc<AppState>, StartupError> {
    config.validate()?;
    let store =
        RuleStore::open(&config.rulebase_path, config.seed_if_missing).map_err(|source| {
            StartupError::RuleBase {
                path: config.rulebase_path.display().to_string(),
                source,
            }
        })?;
    let store = Arc::new(store);
    let mut agent_config = config.agent.clone();
    agent_config.log_path = Some(config.agent_log_path());
    let agent = Arc::new(Agent::new(store.clone(), agent_config, fetcher));
    let sessions = SessionRegistry::new(Duration::from_secs(config.session_idle_timeout_seconds));
    Ok(Arc::new(AppState::new(
        store,
        FuzzyEngine::new(config.membership()?),
        agent,
        sessions,
    )))
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
}

/// Serves `state` on `listener` until `shutdown` resolves. Starts the
/// periodic agent when sources are configured.
pub async fn run(
    listener: TcpListener,
    state: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), StartupError> {
    let stop = StopSignal::new();
    let periodic = (!state.agent.config().sources.is_empty()).then(|| {
        let agent = state.agent.clone();
        let stop = stop.clone();
        let interval = agent.config().poll_interval();
        std::thread::spawn(move || run_periodic(&agent, interval, &stop))
    });

    let sweeper = {
        let state = state.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(Duration::from_secs(60));
            loop {
                tick.tick().await;
                let purged = state.sessions.purge_expired();
                if purged > 0 {
                    tracing::debug!(purged, "expired idle sessions");
                }
            }
        })
    };

    let result = axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(StartupError::Serve);

    sweeper.abort();
    stop.stop();
    if let Some(handle) = periodic {
        let _ = tokio::task::spawn_blocking(move || handle.join()).await;
    }
    result
}

/// Entry point for `kbts serve`.
pub async fn serve(config: ServiceConfig, fetcher: Arc<dyn Fetcher>) -> Result<(), StartupError> {
    let state = build_state(&config, fetcher)?;
    let listener = TcpListener::bind(&config.listen_addr)
        .await
        .map_err(|source| StartupError::Bind {
            addr: config.listen_addr.clone(),
            source,
        })?;
    let addr: SocketAddr = listener.local_addr().map_err(StartupError::Serve)?;
    let snapshot = state.store.snapshot();
    tracing::info!(%addr, rules = snapshot.len(), version = snapshot.version(), "serving");
    println!("kbts listening on http://{addr}");
    let _ = std::io::stdout().flush();
    run(listener, state, shutdown_signal()).await
}
