//! Append-only response cache: one JSON line per entry, keyed by the content
//! digest of (prompt, model, temperature, max tokens). Reply text is stored
//! verbatim.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::LlmError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub model_name: String,
    pub temperature: f64,
    pub raw_text: String,
}

pub struct ResponseCache {
    path: PathBuf,
    inner: Mutex<Inner>,
}

struct Inner {
    entries: HashMap<String, CacheEntry>,
    writer: File,
}

impl ResponseCache {
    /// Open (or create) the cache file and load every existing entry.
    pub fn open(path: &Path) -> Result<ResponseCache, LlmError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(LlmError::cache_io)?;
            }
        }
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(LlmError::cache_io)?);
            for (lineno, line) in reader.lines().enumerate() {
                let line = line.map_err(LlmError::cache_io)?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheEntry = serde_json::from_str(&line).map_err(|e| {
                    LlmError::Cache(format!("{}:{}: {e}", path.display(), lineno + 1))
                })?;
                entries.insert(entry.key.clone(), entry);
            }
        }
        let writer = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(LlmError::cache_io)?;
        Ok(ResponseCache {
            path: path.to_path_buf(),
            inner: Mutex::new(Inner { entries, writer }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        self.inner.lock().unwrap().entries.get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Insert and persist one entry; writes are serialized through the lock.
    /// A key already present is left untouched (first write wins).
    pub fn put(&self, entry: CacheEntry) -> Result<(), LlmError> {
        let mut inner = self.inner.lock().unwrap();
        if inner.entries.contains_key(&entry.key) {
            return Ok(());
        }
        let line = serde_json::to_string(&entry).map_err(|e| LlmError::Cache(e.to_string()))?;
        inner
            .writer
            .write_all(line.as_bytes())
            .map_err(LlmError::cache_io)?;
        inner.writer.write_all(b"\n").map_err(LlmError::cache_io)?;
        inner.writer.flush().map_err(LlmError::cache_io)?;
        inner.entries.insert(entry.key.clone(), entry);
        Ok(())
    }
}
