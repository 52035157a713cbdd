//! Batch runs over a run directory.
//!
//! Layout of `run_dir`:
//!
//! - `requests.jsonl`: the corpus, one [`InferRequest`] per line
//! - `journal.jsonl`: completions, see [`crate::journal`]
//! - `manifest.json`: totals and failed ids, rewritten at the end of each run
//! - `.lock`: advisory lock held for the lifetime of a run

use std::collections::{BTreeSet, HashSet};
use std::fs::{File, TryLockError};
use std::path::Path;
use std::sync::mpsc;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tokio::sync::oneshot;

use crate::client::{ChatClient, EndpointConfig};
use crate::journal::{EntryStatus, JournalEntry, JournalState, JournalWriter};
use crate::InferError;

pub const REQUESTS_FILE: &str = "requests.jsonl";
pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferRequest {
    pub record_id: String,
    pub instruction: String,
    pub input: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub total: usize,
    pub ok: usize,
    pub failed: usize,
    pub pending: usize,
    pub failed_ids: Vec<String>,
}

/// Outcome of [`run_inference`] or [`resume_run`].
#[derive(Debug, Clone)]
pub struct RunJournal {
    pub manifest: RunManifest,
    pub state: JournalState,
    /// Records sent to the endpoint during this invocation.
    pub issued: usize,
}

impl RunJournal {
    pub fn is_complete(&self) -> bool {
        self.manifest.ok == self.manifest.total
    }
}

/// Exclusive ownership of a run directory. Released on drop or process exit.
#[derive(Debug)]
pub struct RunLock {
    _file: File,
}

impl RunLock {
    pub fn acquire(run_dir: &Path) -> Result<Self, InferError> {
        let file = File::options()
            .create(true)
            .truncate(false)
            .write(true)
            .open(run_dir.join(LOCK_FILE))?;
        match file.try_lock() {
            Ok(()) => Ok(RunLock { _file: file }),
            Err(TryLockError::WouldBlock) => Err(InferError::RunDirLocked(run_dir.to_path_buf())),
            Err(TryLockError::Error(e)) => Err(e.into()),
        }
    }
}

fn encode_requests(requests: &[InferRequest]) -> String {
    let mut out = String::new();
    for r in requests {
        out.push_str(&serde_json::to_string(r).expect("request serializes"));
        out.push('\n');
    }
    out
}

pub fn read_requests(run_dir: &Path) -> Result<Vec<InferRequest>, InferError> {
    let path = run_dir.join(REQUESTS_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => InferError::NoJournal(path.clone()),
        _ => e.into(),
    })?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| InferError::CorruptRequests {
                line: i + 1,
                detail: e.to_string(),
            })
        })
        .collect()
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), InferError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    File::open(&tmp)?.sync_all()?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Run every request in `requests`, journaling each completion.
///
/// Calling this again on the same directory with the same corpus continues
/// the earlier run, as [`resume_run`] would.
pub async fn run_inference(
    requests: Vec<InferRequest>,
    endpoint: &EndpointConfig,
    run_dir: &Path,
) -> Result<RunJournal, InferError> {
    endpoint.validate()?;
    if requests.is_empty() {
        return Err(InferError::EmptyCorpus);
    }
    let mut seen = HashSet::new();
    for r in &requests {
        if !seen.insert(r.record_id.as_str()) {
            return Err(InferError::DuplicateRecord(r.record_id.clone()));
        }
    }
    std::fs::create_dir_all(run_dir)?;
    let _lock = RunLock::acquire(run_dir)?;

    let encoded = encode_requests(&requests);
    let req_path = run_dir.join(REQUESTS_FILE);
    if req_path.exists() {
        if std::fs::read_to_string(&req_path)? != encoded {
            return Err(InferError::RunMismatch(run_dir.to_path_buf()));
        }
    } else {
        write_atomic(&req_path, encoded.as_bytes())?;
    }
    let run_id = sha256_hex(encoded.as_bytes())[..16].to_string();
    execute(run_id, &requests, endpoint, run_dir).await
}

/// Re-issue every record of an earlier run that has no ok entry.
pub async fn resume_run(run_dir: &Path, endpoint: &EndpointConfig) -> Result<RunJournal, InferError> {
    endpoint.validate()?;
    let _lock = RunLock::acquire(run_dir)?;
    let journal = run_dir.join(JOURNAL_FILE);
    if !journal.exists() {
        return Err(InferError::NoJournal(journal));
    }
    let requests = read_requests(run_dir)?;
    let run_id = sha256_hex(encode_requests(&requests).as_bytes())[..16].to_string();
    execute(run_id, &requests, endpoint, run_dir).await
}

type Ack = oneshot::Sender<Result<(), InferError>>;

/// Dedicated thread that owns the journal file.
fn spawn_writer(mut writer: JournalWriter) -> (mpsc::Sender<(JournalEntry, Ack)>, std::thread::JoinHandle<()>) {
    let (tx, rx) = mpsc::channel::<(JournalEntry, Ack)>();
    let handle = std::thread::spawn(move || {
        for (entry, ack) in rx {
            let _ = ack.send(writer.append(&entry));
        }
    });
    (tx, handle)
}

async fn execute(
    run_id: String,
    requests: &[InferRequest],
    endpoint: &EndpointConfig,
    run_dir: &Path,
) -> Result<RunJournal, InferError> {
    let (writer, mut state) = JournalWriter::open(&run_dir.join(JOURNAL_FILE))?;
    let known: BTreeSet<&str> = requests.iter().map(|r| r.record_id.as_str()).collect();
    if let Some(stray) = state.entries.keys().find(|id| !known.contains(id.as_str())) {
        return Err(InferError::CorruptJournal {
            line: 0,
            detail: format!("entry for unknown record {stray}"),
        });
    }

    let todo: Vec<&InferRequest> = requests.iter().filter(|r| !state.is_ok(&r.record_id)).collect();
    let issued = todo.len();
    log::info!("run {run_id}: {} of {} records to issue", issued, requests.len());

    let client = ChatClient::new(endpoint.clone())?;
    let (tx, writer_thread) = spawn_writer(writer);

    let results: Vec<Result<JournalEntry, InferError>> = stream::iter(todo)
        .map(|req| {
            let client = &client;
            let tx = tx.clone();
            async move {
                let body = client.request_body(&req.instruction, &req.input, Some(&req.record_id));
                let digest = sha256_hex(body.to_string().as_bytes());
                let started = std::time::Instant::now();
                let entry = match client.send(&body).await {
                    Ok(c) => JournalEntry {
                        record_id: req.record_id.clone(),
                        request_digest: digest,
                        status: EntryStatus::Ok,
                        raw_output: Some(c.content),
                        error: None,
                        attempts: c.attempts,
                        latency_ms: c.latency.as_millis() as u64,
                    },
                    Err(e) => {
                        log::warn!("record {} failed: {e}", req.record_id);
                        JournalEntry {
                            record_id: req.record_id.clone(),
                            request_digest: digest,
                            status: EntryStatus::Failed,
                            raw_output: None,
                            error: Some(e.to_string()),
                            attempts: e.attempts(),
                            latency_ms: started.elapsed().as_millis() as u64,
                        }
                    }
                };
                let (ack_tx, ack_rx) = oneshot::channel();
                tx.send((entry.clone(), ack_tx)).map_err(|_| InferError::WriterGone)?;
                ack_rx.await.map_err(|_| InferError::WriterGone)??;
                Ok(entry)
            }
        })
        .buffer_unordered(endpoint.concurrency)
        .collect()
        .await;
    drop(tx);
    let _ = writer_thread.join();

    for r in results {
        let entry = r?;
        state.entries.insert(entry.record_id.clone(), entry);
        state.lines += 1;
    }

    let failed_ids: Vec<String> = requests
        .iter()
        .filter(|r| state.entries.get(&r.record_id).is_some_and(|e| e.status == EntryStatus::Failed))
        .map(|r| r.record_id.clone())
        .collect();
    let ok = requests.iter().filter(|r| state.is_ok(&r.record_id)).count();
    let manifest = RunManifest {
        run_id,
        total: requests.len(),
        ok,
        failed: failed_ids.len(),
        pending: requests.len() - ok - failed_ids.len(),
        failed_ids,
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_atomic(&run_dir.join(MANIFEST_FILE), json.as_bytes())?;
    Ok(RunJournal { manifest, state, issued })
}
