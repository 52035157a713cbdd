//! Append-only run journal.
//!
//! One JSON object per line. Every append is flushed and fsynced before the
//! caller is told the record is done, so a hard kill loses at most the
//! entries that were never acknowledged. Reading folds entries per record
//! with the last entry winning.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::InferError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryStatus {
    Ok,
    Failed,
    Pending,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub record_id: String,
    pub request_digest: String,
    pub status: EntryStatus,
    #[serde(default)]
    pub raw_output: Option<String>,
    #[serde(default)]
    pub error: Option<String>,
    pub attempts: u32,
    pub latency_ms: u64,
}

/// Journal contents after folding.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JournalState {
    pub entries: BTreeMap<String, JournalEntry>,
    /// Number of well-formed lines read.
    pub lines: usize,
}

impl JournalState {
    pub fn ok_ids(&self) -> impl Iterator<Item = &str> {
        self.entries
            .values()
            .filter(|e| e.status == EntryStatus::Ok)
            .map(|e| e.record_id.as_str())
    }

    pub fn is_ok(&self, id: &str) -> bool {
        self.entries.get(id).is_some_and(|e| e.status == EntryStatus::Ok)
    }

    fn apply(&mut self, entry: JournalEntry) -> Result<(), InferError> {
        if let Some(prev) = self.entries.get(&entry.record_id) {
            if prev.status == EntryStatus::Ok {
                return Err(InferError::CorruptJournal {
                    line: self.lines + 1,
                    detail: format!("second entry for completed record {}", entry.record_id),
                });
            }
        }
        self.entries.insert(entry.record_id.clone(), entry);
        self.lines += 1;
        Ok(())
    }
}

/// Read a journal. A malformed final line is reported as `Some(valid_len)`
/// so the caller may truncate; malformed lines elsewhere are an error.
fn scan(path: &Path) -> Result<(JournalState, Option<u64>), InferError> {
    let file = File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            InferError::NoJournal(path.to_path_buf())
        } else {
            InferError::Io(e)
        }
    })?;
    let mut reader = BufReader::new(file);
    let mut state = JournalState::default();
    let mut offset = 0u64;
    let mut buf = Vec::new();
    let mut lineno = 0;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            return Ok((state, None));
        }
        lineno += 1;
        let complete = buf.last() == Some(&b'\n');
        let parsed = std::str::from_utf8(&buf)
            .ok()
            .filter(|_| complete)
            .and_then(|s| serde_json::from_str::<JournalEntry>(s.trim_end()).ok());
        match parsed {
            Some(entry) => state.apply(entry)?,
            None => {
                let mut rest = Vec::new();
                reader.read_to_end(&mut rest)?;
                if rest.iter().all(u8::is_ascii_whitespace) {
                    return Ok((state, Some(offset)));
                }
                return Err(InferError::CorruptJournal {
                    line: lineno,
                    detail: "unparseable entry".into(),
                });
            }
        }
        offset += n as u64;
    }
}

/// Read a journal without modifying it. A corrupt trailing line is skipped.
pub fn read_journal(path: &Path) -> Result<JournalState, InferError> {
    let (state, trailing) = scan(path)?;
    if trailing.is_some() {
        log::warn!("{}: ignoring corrupt trailing entry", path.display());
    }
    Ok(state)
}

/// Single-writer handle to a journal file.
#[derive(Debug)]
pub struct JournalWriter {
    file: File,
    path: PathBuf,
}

impl JournalWriter {
    /// Open for appending, creating the file if needed. A corrupt trailing
    /// line is truncated away first.
    pub fn open(path: &Path) -> Result<(Self, JournalState), InferError> {
        let state = if path.exists() {
            let (state, trailing) = scan(path)?;
            if let Some(valid_len) = trailing {
                log::warn!(
                    "{}: truncating corrupt trailing entry at byte {valid_len}",
                    path.display()
                );
                let f = OpenOptions::new().write(true).open(path)?;
                f.set_len(valid_len)?;
                f.sync_all()?;
            }
            state
        } else {
            JournalState::default()
        };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok((
            JournalWriter {
                file,
                path: path.to_path_buf(),
            },
            state,
        ))
    }

    pub fn append(&mut self, entry: &JournalEntry) -> Result<(), InferError> {
        let mut line = serde_json::to_vec(entry).expect("entry serializes");
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
