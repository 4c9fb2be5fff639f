//! Rule-base JSON file format.
//!
//! ```json
//! { "version": 3, "rules": [ { "id": 1, "if": "...", "and": "...", "then": "...", "solution": "..." } ] }
//! ```
//!
//! Writes go through a temp file in the target directory followed by a
//! rename, so a reader never sees a partially written file.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::{Result, Rule, RuleBase, RuleError};

#[derive(Serialize)]
struct FileRef<'a> {
    version: u64,
    rules: &'a [Rule],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileOwned {
    version: u64,
    rules: Vec<Rule>,
}

/// Canonical serialization: two-space indented JSON plus a trailing newline.
pub fn to_canonical_json(rulebase: &RuleBase) -> String {
    let mut text = serde_json::to_string_pretty(&FileRef {
        version: rulebase.version(),
        rules: rulebase.rules(),
    })
    .expect("rule base serializes");
    text.push('\n');
    text
}

/// Parses and validates a rule-base document.
pub fn parse(text: &str) -> Result<RuleBase> {
    let doc: FileOwned = serde_json::from_str(text).map_err(|e| RuleError::Parse {
        position: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    RuleBase::from_records(doc.version, doc.rules)
}

pub fn load(path: &Path) -> Result<RuleBase> {
    let text = fs::read_to_string(path)?;
    parse(&text)
}

pub fn save(rulebase: &RuleBase, path: &Path) -> Result<()> {
    write_atomic(path, to_canonical_json(rulebase).as_bytes())?;
    Ok(())
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn temp_path(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "rules".into());
    let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    path.with_file_name(format!(".{name}.{}.{n}.tmp", std::process::id()))
}

/// temp file -> write -> fsync -> rename -> fsync(dir)
pub(crate) fn write_atomic(path: &Path, data: &[u8]) -> std::io::Result<()> {
    let tmp = temp_path(path);
    let result = (|| {
        let mut file = File::create(&tmp)?;
        file.write_all(data)?;
        file.sync_all()?;
        fs::rename(&tmp, path)?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            // Directory fsync is not supported everywhere; the rename already happened.
            if let Ok(d) = File::open(dir) {
                let _ = d.sync_all();
            }
        }
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}
