//! Append-only record log and content-addressed blob directory.
//!
//! `records.jsonl` holds one full [`AnalysisRecord`] per line; a later line
//! with the same `record_id` supersedes earlier ones. Blobs live at
//! `blobs/<sha256>.wav` and are verified against their name when read.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::Utc;
use sha2::{Digest, Sha256};

use crate::error::StoreError;
use crate::record::{AnalysisRecord, ReportStatus};

pub const LOG_FILE: &str = "records.jsonl";
pub const BLOB_DIR: &str = "blobs";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Default)]
struct Index {
    records: HashMap<String, AnalysisRecord>,
    /// Record ids in creation order.
    order: Vec<String>,
    by_upload_key: HashMap<String, String>,
}

impl Index {
    fn apply(&mut self, record: AnalysisRecord) {
        if !self.records.contains_key(&record.record_id) {
            self.order.push(record.record_id.clone());
            self.by_upload_key
                .insert(record.upload_key.clone(), record.record_id.clone());
        }
        self.records.insert(record.record_id.clone(), record);
    }
}

pub struct RecordStore {
    dir: PathBuf,
    log: Mutex<File>,
    index: Mutex<Index>,
}

impl RecordStore {
    /// Opens (creating if needed) a store and replays its log.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        let blobs = dir.join(BLOB_DIR);
        std::fs::create_dir_all(&blobs).map_err(|e| StoreError::io(&blobs, e))?;
        let log_path = dir.join(LOG_FILE);
        let mut index = Index::default();
        if log_path.exists() {
            let file = File::open(&log_path).map_err(|e| StoreError::io(&log_path, e))?;
            let lines: Vec<String> = BufReader::new(file)
                .lines()
                .collect::<Result<_, _>>()
                .map_err(|e| StoreError::io(&log_path, e))?;
            let n = lines.len();
            for (i, line) in lines.into_iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<AnalysisRecord>(&line) {
                    Ok(r) => index.apply(r),
                    // a torn final write from a crash
                    Err(e) if i + 1 == n => log::warn!("ignoring unreadable last log line: {e}"),
                    Err(e) => {
                        return Err(StoreError::Corrupt {
                            line: i + 1,
                            message: e.to_string(),
                        })
                    }
                }
            }
        }
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(|e| StoreError::io(&log_path, e))?;
        log::info!(
            "record store {} opened with {} records",
            dir.display(),
            index.order.len()
        );
        Ok(Self {
            dir,
            log: Mutex::new(log),
            index: Mutex::new(index),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn append(&self, record: &AnalysisRecord) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(record).expect("records serialize");
        line.push(b'\n');
        let mut log = self.log.lock().expect("log lock");
        let path = self.dir.join(LOG_FILE);
        log.write_all(&line).map_err(|e| StoreError::io(&path, e))?;
        log.sync_data().map_err(|e| StoreError::io(&path, e))
    }

    /// Writes a blob once under its hash and returns the hash.
    pub fn put_blob(&self, bytes: &[u8]) -> Result<String, StoreError> {
        let hash = sha256_hex(bytes);
        let path = self.blob_path(&hash);
        if !path.exists() {
            let tmp = self
                .dir
                .join(BLOB_DIR)
                .join(format!(".{hash}.{:x}.tmp", rand::random::<u64>()));
            std::fs::write(&tmp, bytes).map_err(|e| StoreError::io(&tmp, e))?;
            std::fs::rename(&tmp, &path).map_err(|e| StoreError::io(&path, e))?;
        }
        Ok(hash)
    }

    pub fn get_blob(&self, hash: &str) -> Result<Vec<u8>, StoreError> {
        if hash.len() != 64 || !hash.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(StoreError::BlobMismatch(hash.to_string()));
        }
        let path = self.blob_path(hash);
        let bytes = std::fs::read(&path).map_err(|e| StoreError::io(&path, e))?;
        if sha256_hex(&bytes) != hash {
            return Err(StoreError::BlobMismatch(hash.to_string()));
        }
        Ok(bytes)
    }

    fn blob_path(&self, hash: &str) -> PathBuf {
        self.dir.join(BLOB_DIR).join(format!("{hash}.wav"))
    }

    pub fn find_by_upload_key(&self, key: &str) -> Option<AnalysisRecord> {
        let index = self.index.lock().expect("index lock");
        index
            .by_upload_key
            .get(key)
            .and_then(|id| index.records.get(id))
            .cloned()
    }

    /// Stores `record` unless one with the same upload key exists; returns the
    /// stored record and whether it is new.
    pub fn insert_or_get(&self, record: AnalysisRecord) -> Result<(AnalysisRecord, bool), StoreError> {
        let mut index = self.index.lock().expect("index lock");
        if let Some(existing) = index
            .by_upload_key
            .get(&record.upload_key)
            .and_then(|id| index.records.get(id))
        {
            return Ok((existing.clone(), false));
        }
        self.append(&record)?;
        index.apply(record.clone());
        Ok((record, true))
    }

    pub fn get(&self, id: &str) -> Option<AnalysisRecord> {
        self.index.lock().expect("index lock").records.get(id).cloned()
    }

    /// Marks a draft as submitted. Submitting twice changes nothing.
    pub fn submit(&self, id: &str) -> Result<Option<AnalysisRecord>, StoreError> {
        let mut index = self.index.lock().expect("index lock");
        let Some(current) = index.records.get(id) else {
            return Ok(None);
        };
        if current.status == ReportStatus::Submitted {
            return Ok(Some(current.clone()));
        }
        let mut updated = current.clone();
        updated.status = ReportStatus::Submitted;
        updated.submitted_at = Some(Utc::now());
        self.append(&updated)?;
        index.apply(updated.clone());
        Ok(Some(updated))
    }

    /// Records in creation order, optionally filtered by status.
    pub fn list(&self, status: Option<ReportStatus>) -> Vec<AnalysisRecord> {
        let index = self.index.lock().expect("index lock");
        index
            .order
            .iter()
            .filter_map(|id| index.records.get(id))
            .filter(|r| status.is_none_or(|s| r.status == s))
            .cloned()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.index.lock().expect("index lock").order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
