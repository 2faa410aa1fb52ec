//! History-preserving report service over a snapshot store.
//!
//! Endpoints:
//!
//! * `GET  /apps`                    — known app ids
//! * `GET  /apps/{id}/reports`        — full history, oldest first
//! * `GET  /apps/{id}/reports/latest` — most recent snapshot
//! * `POST /apps/{id}/rescan`         — append the next scripted snapshot
//!
//! Histories are append-only: a snapshot once served is served identically
//! forever. Rescans are replay-driven — a script supplies the snapshot each
//! rescan produces — so platform dynamicity (scanner churn, verdict flips)
//! becomes an injectable test fixture rather than a live dependency.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use thiserror::Error;

use crate::report::{self, ScanSnapshot};
use crate::store::{Store, StoreError};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot bind `{bind}`: {source}")]
    Bind {
        bind: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid replay script: {0}")]
    InvalidReplayScript(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("service runtime error: {0}")]
    Runtime(String),
}

/// Scripted snapshots appended one per rescan request, per app.
#[derive(Debug, Default)]
pub struct ReplayScript {
    scripts: HashMap<String, Vec<ScanSnapshot>>,
}

impl ReplayScript {
    /// Parses `{ "<app_id>": [<report object>, ...], ... }`. Every scripted
    /// report must parse as a snapshot and carry the app id it is keyed by.
    pub fn from_json(text: &str) -> Result<Self, ServiceError> {
        let raw: HashMap<String, Vec<serde_json::Value>> = serde_json::from_str(text)
            .map_err(|e| ServiceError::InvalidReplayScript(e.to_string()))?;
        let mut scripts = HashMap::new();
        for (app_id, reports) in raw {
            let mut snapshots = Vec::with_capacity(reports.len());
            for (i, value) in reports.into_iter().enumerate() {
                let parsed = report::parse_snapshot(&value.to_string()).map_err(|e| {
                    ServiceError::InvalidReplayScript(format!("app {app_id} entry {i}: {e}"))
                })?;
                if parsed.snapshot.app_id != app_id {
                    return Err(ServiceError::InvalidReplayScript(format!(
                        "app {app_id} entry {i} carries app id {}",
                        parsed.snapshot.app_id
                    )));
                }
                snapshots.push(parsed.snapshot);
            }
            scripts.insert(app_id, snapshots);
        }
        Ok(ReplayScript { scripts })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| ServiceError::InvalidReplayScript(e.to_string()))?;
        Self::from_json(&text)
    }

    fn has_app(&self, app_id: &str) -> bool {
        self.scripts.contains_key(app_id)
    }
}

struct ServiceState {
    store: RwLock<Store>,
    replay: Option<ReplayScript>,
    cursors: Mutex<HashMap<String, usize>>,
}

/// Handle to a running service; dropping it shuts the service down.
pub struct ServiceHandle {
    addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    /// Blocks until the service exits.
    pub fn join(mut self) {
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Starts the service on `bind` (e.g. `127.0.0.1:8585`; port 0 picks a free
/// one) over its own runtime thread.
pub fn serve(
    store: Store,
    bind: &str,
    replay: Option<ReplayScript>,
) -> Result<ServiceHandle, ServiceError> {
    let state = Arc::new(ServiceState {
        store: RwLock::new(store),
        replay,
        cursors: Mutex::new(HashMap::new()),
    });
    let app = Router::new()
        .route("/apps", get(list_apps))
        .route("/apps/{id}/reports", get(full_history))
        .route("/apps/{id}/reports/latest", get(latest_report))
        .route("/apps/{id}/rescan", post(rescan))
        .with_state(state);

    let (shutdown_tx, shutdown_rx) = tokio::sync::oneshot::channel::<()>();
    let (ready_tx, ready_rx) = std::sync::mpsc::channel();
    let bind_owned = bind.to_owned();
    let thread = std::thread::spawn(move || {
        let runtime = match tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
        {
            Ok(rt) => rt,
            Err(e) => {
                let _ = ready_tx.send(Err(ServiceError::Runtime(e.to_string())));
                return;
            }
        };
        runtime.block_on(async move {
            let listener = match tokio::net::TcpListener::bind(&bind_owned).await {
                Ok(l) => l,
                Err(e) => {
                    let _ = ready_tx.send(Err(ServiceError::Bind { bind: bind_owned, source: e }));
                    return;
                }
            };
            let addr = match listener.local_addr() {
                Ok(a) => a,
                Err(e) => {
                    let _ = ready_tx.send(Err(ServiceError::Bind { bind: bind_owned, source: e }));
                    return;
                }
            };
            let _ = ready_tx.send(Ok(addr));
            let served = axum::serve(listener, app).with_graceful_shutdown(async {
                let _ = shutdown_rx.await;
            });
            if let Err(e) = served.await {
                eprintln!("service error: {e}");
            }
        });
    });

    let addr = ready_rx
        .recv()
        .map_err(|_| ServiceError::Runtime("service thread exited before binding".into()))??;
    Ok(ServiceHandle { addr, shutdown: Some(shutdown_tx), thread: Some(thread) })
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error_response(status: StatusCode, message: &str) -> Response {
    json_response(status, format!("{{\"error\":\"{message}\"}}"))
}

async fn list_apps(State(state): State<Arc<ServiceState>>) -> Response {
    let store = state.store.read().unwrap();
    let ids = store.app_ids();
    json_response(StatusCode::OK, serde_json::to_string(&ids).expect("ids serialize"))
}

async fn full_history(
    State(state): State<Arc<ServiceState>>,
    UrlPath(app_id): UrlPath<String>,
) -> Response {
    let store = state.store.read().unwrap();
    match store.history(&app_id) {
        Ok(history) => {
            let body: Vec<String> =
                history.snapshots.iter().map(ScanSnapshot::to_json).collect();
            json_response(StatusCode::OK, format!("[{}]", body.join(",")))
        }
        Err(StoreError::UnknownApp(_)) => error_response(StatusCode::NOT_FOUND, "UnknownApp"),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, &e.to_string()),
    }
}

async fn latest_report(
    State(state): State<Arc<ServiceState>>,
    UrlPath(app_id): UrlPath<String>,
) -> Response {
    let store = state.store.read().unwrap();
    match store.history(&app_id) {
        Ok(history) => match history.snapshots.last() {
            Some(snapshot) => json_response(StatusCode::OK, snapshot.to_json()),
            None => error_response(StatusCode::NOT_FOUND, "UnknownApp"),
        },
        Err(StoreError::UnknownApp(_)) => error_response(StatusCode::NOT_FOUND, "UnknownApp"),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, &e.to_string()),
    }
}

async fn rescan(
    State(state): State<Arc<ServiceState>>,
    UrlPath(app_id): UrlPath<String>,
) -> Response {
    // Appends are serialized per app by the cursor lock held across the
    // store write.
    let mut cursors = state.cursors.lock().unwrap();
    if let Some(replay) = &state.replay {
        if replay.has_app(&app_id) {
            let cursor = cursors.entry(app_id.clone()).or_insert(0);
            let script = &replay.scripts[&app_id];
            if *cursor >= script.len() {
                return error_response(StatusCode::CONFLICT, "NoMoreScriptedScans");
            }
            let snapshot = &script[*cursor];
            *cursor += 1;
            let mut store = state.store.write().unwrap();
            return match store.ingest_snapshot(snapshot) {
                Ok(_) => json_response(StatusCode::ACCEPTED, "{\"accepted\":true}".to_owned()),
                Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, &e.to_string()),
            };
        }
    }
    let store = state.store.read().unwrap();
    if store.contains(&app_id) {
        // No scripted reanalysis: acknowledge, history stays as-is.
        json_response(StatusCode::ACCEPTED, "{\"accepted\":true}".to_owned())
    } else {
        error_response(StatusCode::NOT_FOUND, "UnknownApp")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_script_validates_app_ids() {
        let good = r#"{"app":[{"sha256":"app","scan_date":"2019-01-01","positives":1,"total":2}]}"#;
        assert!(ReplayScript::from_json(good).is_ok());
        let mismatched =
            r#"{"app":[{"sha256":"other","scan_date":"2019-01-01","positives":1,"total":2}]}"#;
        assert!(matches!(
            ReplayScript::from_json(mismatched),
            Err(ServiceError::InvalidReplayScript(_))
        ));
        let malformed = r#"{"app":[{"scan_date":"2019-01-01"}]}"#;
        assert!(matches!(
            ReplayScript::from_json(malformed),
            Err(ServiceError::InvalidReplayScript(_))
        ));
    }
}
