//! Batch inference against chat-completion endpoints.
//!
//! [`run_inference`] sends each request once under a concurrency limit and
//! journals every completion durably; [`resume_run`] picks up whatever an
//! interrupted run left unfinished. [`mock`] provides a scripted server
//! speaking the same protocol.

use std::path::PathBuf;

use thiserror::Error;

pub mod client;
pub mod journal;
pub mod mock;
pub mod run;

pub use client::{chat_complete, ChatClient, Completion, EndpointConfig};
pub use journal::{read_journal, EntryStatus, JournalEntry, JournalState};
pub use run::{read_requests, resume_run, run_inference, InferRequest, RunJournal, RunManifest};

#[derive(Debug, Error)]
pub enum InferError {
    #[error("invalid endpoint config: {0}")]
    InvalidConfig(String),
    #[error("environment variable {0} holding the auth token is not set")]
    MissingToken(String),
    #[error("endpoint error{} after {attempts} attempts: {detail}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Endpoint {
        status: Option<u16>,
        attempts: u32,
        detail: String,
    },
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("malformed endpoint response: {0}")]
    MalformedResponse(String),
    #[error("no journal at {0}")]
    NoJournal(PathBuf),
    #[error("corrupt journal at line {line}: {detail}")]
    CorruptJournal { line: usize, detail: String },
    #[error("corrupt requests file at line {line}: {detail}")]
    CorruptRequests { line: usize, detail: String },
    #[error("run directory {0} is locked by another run")]
    RunDirLocked(PathBuf),
    #[error("run directory {0} holds a run over a different corpus")]
    RunMismatch(PathBuf),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("duplicate record id {0}")]
    DuplicateRecord(String),
    #[error("journal writer stopped")]
    WriterGone,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl InferError {
    /// HTTP attempts behind a per-record failure.
    pub fn attempts(&self) -> u32 {
        match self {
            InferError::Endpoint { attempts, .. } | InferError::Timeout { attempts } => *attempts,
            _ => 1,
        }
    }
}
