//! Scripted chat-completion server for tests.
//!
//! Requests are matched to records through the `# record_id:` tag that
//! [`crate::EndpointConfig::tag_record_ids`] appends to the user message.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::{oneshot, Notify};

use crate::client::extract_record_id;

#[derive(Debug, Error)]
pub enum MockError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("echo_gold mode requires a gold index")]
    MissingGoldIndex,
    #[error("fixed_response mode requires a response text")]
    MissingFixedResponse,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockMode {
    #[default]
    EchoGold,
    FixedResponse,
    FaultSequence,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecordOverride {
    /// Replaces the mode's answer for this record.
    pub response: Option<String>,
    /// Status codes for the first attempts; replaces the global schedule.
    pub faults: Option<Vec<u16>>,
    /// Answer every attempt with this status.
    pub always_status: Option<u16>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Latency {
    pub min_ms: u64,
    pub max_ms: u64,
}

/// Behavior of a mock server. Loadable from JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockScript {
    pub mode: MockMode,
    pub fixed_response: Option<String>,
    /// In `fault_sequence` mode, the status for attempt *n* of each record;
    /// 200 or any attempt past the end answers normally.
    pub faults: Vec<u16>,
    pub overrides: BTreeMap<String, RecordOverride>,
    pub latency: Latency,
    /// Stall every request after this many have been admitted, until
    /// [`MockHandle::release`] is called.
    pub hold_after: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AccessEntry {
    pub seq: usize,
    pub record_id: Option<String>,
    /// 1-based attempt number for this record.
    pub attempt: usize,
    pub status: u16,
    pub in_flight: usize,
}

#[derive(Debug, Default)]
struct Log {
    entries: Vec<AccessEntry>,
    attempts: HashMap<String, usize>,
    anonymous: usize,
}

struct Shared {
    script: MockScript,
    gold: HashMap<String, String>,
    log: Mutex<Log>,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    successes: AtomicUsize,
    held: Mutex<bool>,
    admitted: Mutex<usize>,
    release: Notify,
}

/// Running mock server. Stops when dropped.
pub struct MockHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    shutdown: Option<oneshot::Sender<()>>,
}

impl MockHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn access_log(&self) -> Vec<AccessEntry> {
        self.shared.log.lock().unwrap().entries.clone()
    }

    pub fn max_in_flight(&self) -> usize {
        self.shared.max_in_flight.load(Ordering::SeqCst)
    }

    /// Number of requests received for `record_id`.
    pub fn requests_for(&self, record_id: &str) -> usize {
        self.shared.log.lock().unwrap().attempts.get(record_id).copied().unwrap_or(0)
    }

    pub fn total_requests(&self) -> usize {
        self.shared.log.lock().unwrap().entries.len()
    }

    /// Answers with status 200 so far.
    pub fn successes(&self) -> usize {
        self.shared.successes.load(Ordering::SeqCst)
    }

    /// Let held requests proceed and stop holding new ones.
    pub fn release(&self) {
        *self.shared.held.lock().unwrap() = false;
        self.shared.release.notify_waiters();
    }

    pub fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

impl Drop for MockHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.release();
    }
}

/// Start a server on `127.0.0.1:port`; port 0 picks a free one.
pub async fn serve(
    script: MockScript,
    gold_index: HashMap<String, String>,
    port: u16,
) -> Result<MockHandle, MockError> {
    if script.mode == MockMode::EchoGold && gold_index.is_empty() {
        return Err(MockError::MissingGoldIndex);
    }
    if script.mode == MockMode::FixedResponse && script.fixed_response.is_none() {
        return Err(MockError::MissingFixedResponse);
    }
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port))
        .await
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::AddrInUse => MockError::PortInUse(port),
            _ => MockError::Io(e),
        })?;
    let addr = listener.local_addr()?;
    let held = script.hold_after.is_some();
    let shared = Arc::new(Shared {
        script,
        gold: gold_index,
        log: Mutex::new(Log::default()),
        in_flight: AtomicUsize::new(0),
        max_in_flight: AtomicUsize::new(0),
        successes: AtomicUsize::new(0),
        held: Mutex::new(held),
        admitted: Mutex::new(0),
        release: Notify::new(),
    });
    let app = Router::new()
        .route("/chat/completions", post(handle))
        .route("/v1/chat/completions", post(handle))
        .with_state(shared.clone());
    let (tx, rx) = oneshot::channel::<()>();
    tokio::spawn(async move {
        let _ = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await;
    });
    Ok(MockHandle {
        addr,
        shared,
        shutdown: Some(tx),
    })
}

struct InFlight<'a>(&'a AtomicUsize);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

fn user_content(body: &Value) -> Option<&str> {
    body.get("messages")?
        .as_array()?
        .iter()
        .rev()
        .find(|m| m.get("role").and_then(Value::as_str) == Some("user"))?
        .get("content")?
        .as_str()
}

async fn handle(State(shared): State<Arc<Shared>>, Json(body): Json<Value>) -> Response {
    let now = shared.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    let _guard = InFlight(&shared.in_flight);
    shared.max_in_flight.fetch_max(now, Ordering::SeqCst);

    let record_id = user_content(&body).and_then(extract_record_id).map(str::to_string);

    if let Some(limit) = shared.script.hold_after {
        loop {
            let notified = shared.release.notified();
            {
                let mut admitted = shared.admitted.lock().unwrap();
                if !*shared.held.lock().unwrap() || *admitted < limit {
                    *admitted += 1;
                    break;
                }
            }
            notified.await;
        }
    }

    let latency = shared.script.latency;
    if latency.max_ms > 0 {
        let ms = rand::rng().random_range(latency.min_ms..=latency.max_ms.max(latency.min_ms));
        tokio::time::sleep(Duration::from_millis(ms)).await;
    }

    let (status, content) = decide(&shared, record_id.as_deref());
    {
        let mut log = shared.log.lock().unwrap();
        let attempt = match &record_id {
            Some(id) => *log.attempts.get(id).unwrap_or(&0),
            None => log.anonymous,
        };
        let seq = log.entries.len();
        log.entries.push(AccessEntry {
            seq,
            record_id: record_id.clone(),
            attempt,
            status,
            in_flight: now,
        });
    }
    if status != 200 {
        let code = StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        return (code, Json(json!({"error": {"message": content, "code": status}}))).into_response();
    }
    shared.successes.fetch_add(1, Ordering::SeqCst);
    Json(json!({
        "id": "mock",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
    }))
    .into_response()
}

/// Status and body for the next attempt; bumps the attempt counter.
fn decide(shared: &Shared, record_id: Option<&str>) -> (u16, String) {
    let script = &shared.script;
    let attempt = {
        let mut log = shared.log.lock().unwrap();
        let counter = match record_id {
            Some(id) => log.attempts.entry(id.to_string()).or_insert(0),
            None => &mut log.anonymous,
        };
        *counter += 1;
        *counter
    };
    let ov = record_id.and_then(|id| script.overrides.get(id));
    if let Some(status) = ov.and_then(|o| o.always_status) {
        return (status, format!("scripted status {status}"));
    }
    let schedule: &[u16] = match (ov.and_then(|o| o.faults.as_deref()), script.mode) {
        (Some(f), _) => f,
        (None, MockMode::FaultSequence) => &script.faults,
        _ => &[],
    };
    if let Some(&status) = schedule.get(attempt - 1) {
        if status != 200 {
            return (status, format!("scripted status {status}"));
        }
    }
    if let Some(resp) = ov.and_then(|o| o.response.clone()) {
        return (200, resp);
    }
    let gold = record_id.and_then(|id| shared.gold.get(id));
    match (script.mode, gold, &script.fixed_response) {
        (MockMode::FixedResponse, _, Some(fixed)) => (200, fixed.clone()),
        (_, Some(g), _) => (200, g.clone()),
        (_, None, Some(fixed)) => (200, fixed.clone()),
        (_, None, None) => (404, format!("unknown record {}", record_id.unwrap_or("<untagged>"))),
    }
}
