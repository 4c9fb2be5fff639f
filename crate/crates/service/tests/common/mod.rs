#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use kbts_service::api::AppState;
use kbts_service::fetch::HttpFetcher;
use kbts_service::server::{build_state, run};
use kbts_service::ServiceConfig;
use tokio::sync::oneshot;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
        .canonicalize()
        .unwrap()
}

pub fn fixture_url(name: &str) -> String {
    url::Url::from_file_path(fixture(name)).unwrap().to_string()
}

pub fn seeded_config(dir: &Path) -> ServiceConfig {
    ServiceConfig {
        listen_addr: "127.0.0.1:0".into(),
        rulebase_path: dir.join("rules.json"),
        seed_if_missing: true,
        ..Default::default()
    }
}

/// Service running on an ephemeral port inside the test's runtime.
pub struct TestServer {
    pub base: String,
    pub state: Arc<AppState>,
    stop: Option<oneshot::Sender<()>>,
    handle: Option<tokio::task::JoinHandle<()>>,
}

impl TestServer {
    pub async fn start(config: &ServiceConfig) -> Self {
        let state = build_state(config, Arc::new(HttpFetcher)).unwrap();
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = oneshot::channel();
        let handle = tokio::spawn({
            let state = state.clone();
            async move {
                run(listener, state, async {
                    let _ = rx.await;
                })
                .await
                .unwrap();
            }
        });
        Self {
            base,
            state,
            stop: Some(tx),
            handle: Some(handle),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    pub async fn shutdown(mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(h) = self.handle.take() {
            h.await.unwrap();
        }
    }
}
