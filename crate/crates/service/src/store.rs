//! Model persistence: every record lives in one JSON file that is rewritten
//! atomically on each change. Without a path the store is memory-only.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use hypforge_core::Diagnostic;
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot access model store {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("model store {path} is corrupt: {source}")]
    Corrupt { path: PathBuf, source: serde_json::Error },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseSummary {
    pub errors: usize,
    pub warnings: usize,
}

impl ParseSummary {
    pub fn of(diags: &[Diagnostic]) -> Self {
        let errors = diags.iter().filter(|d| d.is_error()).count();
        Self { errors, warnings: diags.len() - errors }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub id: String,
    pub name: String,
    /// Stored verbatim.
    pub source: String,
    /// Milliseconds since the Unix epoch.
    pub created: u64,
    pub updated: u64,
    pub last_parse: ParseSummary,
}

#[derive(Default, Serialize, Deserialize)]
struct Contents {
    models: BTreeMap<String, ModelRecord>,
}

pub struct ModelStore {
    path: Option<PathBuf>,
    inner: RwLock<Contents>,
}

pub fn now_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl ModelStore {
    pub fn in_memory() -> Self {
        Self { path: None, inner: RwLock::new(Contents::default()) }
    }

    /// Opens the store at `path`, starting empty if the file does not exist.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let contents = match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map_err(|source| StoreError::Corrupt { path: path.clone(), source })?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Contents::default(),
            Err(source) => return Err(StoreError::Io { path, source }),
        };
        Ok(Self { path: Some(path), inner: RwLock::new(contents) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, id: &str) -> Option<ModelRecord> {
        self.inner.read().models.get(id).cloned()
    }

    pub fn len(&self) -> usize {
        self.inner.read().models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&self, record: ModelRecord) -> Result<(), StoreError> {
        let mut guard = self.inner.write();
        let previous = guard.models.insert(record.id.clone(), record.clone());
        if let Err(e) = self.flush(&guard) {
            match previous {
                Some(p) => guard.models.insert(p.id.clone(), p),
                None => guard.models.remove(&record.id),
            };
            return Err(e);
        }
        Ok(())
    }

    /// Applies `f` to the record and persists it. `None` if the id is unknown.
    pub fn update<F>(&self, id: &str, f: F) -> Result<Option<ModelRecord>, StoreError>
    where
        F: FnOnce(&mut ModelRecord),
    {
        let mut guard = self.inner.write();
        let Some(record) = guard.models.get_mut(id) else { return Ok(None) };
        let previous = record.clone();
        f(record);
        let updated = record.clone();
        if let Err(e) = self.flush(&guard) {
            guard.models.insert(id.to_string(), previous);
            return Err(e);
        }
        Ok(Some(updated))
    }

    fn flush(&self, contents: &Contents) -> Result<(), StoreError> {
        let Some(path) = &self.path else { return Ok(()) };
        let io_err = |source| StoreError::Io { path: path.clone(), source };
        let bytes = serde_json::to_vec_pretty(contents).expect("records serialize");
        let mut tmp = path.clone().into_os_string();
        tmp.push(".tmp");
        fs::write(&tmp, bytes).map_err(io_err)?;
        fs::rename(&tmp, path).map_err(io_err)
    }
}
