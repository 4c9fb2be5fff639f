//! Shared rule base with a single-writer / many-reader discipline.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use super::{file, seed_corpus, Result, RuleBase, RuleError};

/// Holds the current rule-base snapshot and, optionally, its backing file.
///
/// Readers clone an `Arc` of an immutable snapshot. Writers are serialized:
/// each write mutates a private copy, persists it, then publishes it, so a
/// reader sees either the old or the new version and the file on disk is
/// never behind an acknowledged write.
#[derive(Debug)]
pub struct RuleStore {
    current: RwLock<Arc<RuleBase>>,
    writer: Mutex<()>,
    path: Option<PathBuf>,
}

impl RuleStore {
    /// An unpersisted store.
    pub fn in_memory(rulebase: RuleBase) -> Self {
        Self {
            current: RwLock::new(Arc::new(rulebase)),
            writer: Mutex::new(()),
            path: None,
        }
    }

    /// Loads `path`. A missing file is created from the seed corpus when
    /// `seed_if_missing` is set, otherwise it is an error.
    pub fn open(path: impl Into<PathBuf>, seed_if_missing: bool) -> Result<Self> {
        let path = path.into();
        let rulebase = match file::load(&path) {
            Ok(rb) => rb,
            Err(RuleError::Io(e))
                if e.kind() == std::io::ErrorKind::NotFound && seed_if_missing =>
            {
                let rb = seed_corpus();
                file::save(&rb, &path)?;
                rb
            }
            Err(e) => return Err(e),
        };
        Ok(Self {
            current: RwLock::new(Arc::new(rulebase)),
            writer: Mutex::new(()),
            path: Some(path),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn snapshot(&self) -> Arc<RuleBase> {
        self.current
            .read()
            .expect("rule store lock poisoned")
            .clone()
    }

    /// Runs `mutate` against a copy of the current rule base. If it succeeds
    /// and changed the version, the copy is persisted and published.
    pub fn write<T, E>(&self, mutate: impl FnOnce(&mut RuleBase) -> Result<T, E>) -> Result<T, E>
    where
        E: From<RuleError>,
    {
        let _guard = self.writer.lock().expect("rule store writer poisoned");
        let mut working = (*self.snapshot()).clone();
        let before = working.version();
        let out = mutate(&mut working)?;
        if working.version() != before {
            self.publish(working).map_err(E::from)?;
        }
        Ok(out)
    }

    /// Replaces the whole rule base (import).
    pub fn replace(&self, rulebase: RuleBase) -> Result<()> {
        let _guard = self.writer.lock().expect("rule store writer poisoned");
        self.publish(rulebase)
    }

    fn publish(&self, rulebase: RuleBase) -> Result<()> {
        if let Some(path) = &self.path {
            file::save(&rulebase, path)?;
        }
        *self.current.write().expect("rule store lock poisoned") = Arc::new(rulebase);
        Ok(())
    }
}
