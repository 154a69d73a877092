//! Append-only response cache shared by the scoring and translation
//! backends.
//!
//! Each line of the cache file is a JSON object `{"k": <hex key>, "v": ...}`.
//! Keys are SHA-256 over the request parts joined with a separator byte, so
//! the file never stores prompt text. Appending a line is the only write
//! operation, which makes the format safe to extend while older entries are
//! being read; on load, duplicate keys resolve to the last entry and a
//! truncated trailing line is skipped.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::Result;

#[derive(Debug, Serialize, Deserialize)]
struct Line {
    k: String,
    v: serde_json::Value,
}

/// File-backed cache with an in-memory index. Safe for concurrent use from
/// multiple threads of one process, and tolerant of other processes
/// appending to the same file between runs.
pub struct FileCache {
    path: PathBuf,
    inner: Mutex<Inner>,
}

struct Inner {
    map: HashMap<String, serde_json::Value>,
    file: File,
}

/// Hashes the parts of a request into a cache key.
pub fn cache_key(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part.as_bytes());
        hasher.update([0x1f]);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

impl FileCache {
    /// Opens (or creates) the cache file at `path` and loads every complete
    /// entry.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut map = HashMap::new();
        if path.exists() {
            let reader =
                BufReader::new(File::open(&path).map_err(|e| Error::io(&path, e))?);
            for line in reader.lines() {
                let line = line.map_err(|e| Error::io(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Line>(&line) {
                    Ok(entry) => {
                        map.insert(entry.k, entry.v);
                    }
                    Err(_) => {
                        // Most likely a write that was cut short; keep what
                        // parsed so far.
                        log::warn!("skipping malformed cache line in {}", path.display());
                    }
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(FileCache { path, inner: Mutex::new(Inner { map, file }) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, key: &str) -> Option<serde_json::Value> {
        self.inner.lock().unwrap().map.get(key).cloned()
    }

    /// Stores `value` under `key` and appends it to the backing file.
    pub fn put(&self, key: &str, value: serde_json::Value) -> Result<()> {
        let mut inner = self.inner.lock().unwrap();
        let line = serde_json::to_string(&Line { k: key.to_string(), v: value.clone() })?;
        inner
            .file
            .write_all(format!("{line}\n").as_bytes())
            .map_err(|e| Error::io(&self.path, e))?;
        inner.map.insert(key.to_string(), value);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
