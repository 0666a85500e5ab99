//! Append-only label log.
//!
//! Each line of the log is one JSON [`LabelEvent`]. Replaying the log in
//! order and keeping the latest revision per sample id gives the current
//! label set; earlier revisions stay on disk as history. A final line left
//! without its newline by an interrupted write is ignored on replay.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use faultclust_core::labels::LabelRecord;
use serde::{Deserialize, Serialize};

use crate::csvio::read_labels_csv;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEvent {
    /// Position in the log, starting at 1.
    pub revision: u64,
    /// Wall-clock time of the write, milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    pub label: LabelRecord,
}

#[derive(Debug)]
pub struct LabelStore {
    path: PathBuf,
    current: BTreeMap<u64, LabelEvent>,
    revision: u64,
}

impl LabelStore {
    /// Opens (creating if needed) the log at `path` and replays it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                }
                fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                String::new()
            }
            Err(e) => return Err(Error::io(&path, e)),
        };
        let events = replay(&text, &path)?;
        let revision = events.last().map_or(0, |e| e.revision);
        let mut current = BTreeMap::new();
        for e in events {
            current.insert(e.label.sample_id, e);
        }
        Ok(Self {
            path,
            current,
            revision,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Latest revision written so far (0 for an empty log).
    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// Validates `label` against the vocabulary and appends it.
    pub fn append(&mut self, label: LabelRecord) -> Result<LabelEvent> {
        label.validate()?;
        let event = LabelEvent {
            revision: self.revision + 1,
            timestamp_ms: now_ms(),
            label,
        };
        let mut line = serde_json::to_string(&event).map_err(|e| Error::json(&self.path, e))?;
        line.push('\n');
        let mut f = OpenOptions::new()
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        f.write_all(line.as_bytes()).map_err(|e| Error::io(&self.path, e))?;
        f.sync_data().map_err(|e| Error::io(&self.path, e))?;
        self.revision = event.revision;
        self.current.insert(event.label.sample_id, event.clone());
        Ok(event)
    }

    /// Current labels, ordered by sample id.
    pub fn labels(&self) -> Vec<LabelRecord> {
        self.current.values().map(|e| e.label.clone()).collect()
    }

    /// Latest event per sample id, ordered by sample id.
    pub fn events(&self) -> impl Iterator<Item = &LabelEvent> {
        self.current.values()
    }

    pub fn get(&self, sample_id: u64) -> Option<&LabelEvent> {
        self.current.get(&sample_id)
    }

    pub fn contains(&self, sample_id: u64) -> bool {
        self.current.contains_key(&sample_id)
    }
}

fn replay(text: &str, path: &Path) -> Result<Vec<LabelEvent>> {
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    let mut events: Vec<LabelEvent> = Vec::new();
    for line in complete.lines().filter(|l| !l.trim().is_empty()) {
        let e: LabelEvent = serde_json::from_str(line).map_err(|e| Error::json(path, e))?;
        if events.last().is_some_and(|p| p.revision >= e.revision) {
            return Err(Error::malformed(
                path,
                format!("revision {} is out of order", e.revision),
            ));
        }
        events.push(e);
    }
    Ok(events)
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Loads labels from either a `.jsonl` log (replayed) or a label CSV.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<LabelRecord>> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "jsonl") {
        if !path.exists() {
            return Err(Error::io(path, std::io::ErrorKind::NotFound.into()));
        }
        Ok(LabelStore::open(path)?.labels())
    } else {
        read_labels_csv(path)
    }
}
