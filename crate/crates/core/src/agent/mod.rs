//! Rule acquisition from configured web pages.
//!
//! A sync fetches every source, extracts `kb-rules` tables, drops candidates
//! whose condition pair is already known and adds the rest through the normal
//! rule-base insert path. Acquisition is add-only: a scraped rule never
//! replaces an existing one.

mod extract;
mod periodic;

use std::collections::{HashSet, VecDeque};
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rule_model::{RuleBase, RuleDraft, RuleError, RuleStore};

pub use extract::{extract_rules, Extraction, RULE_TABLE_CLASS};
pub use periodic::{run_periodic, PeriodicStats, StopSignal};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct FetchError(pub String);

/// Pluggable transport: URL to page text.
pub trait Fetcher: Send + Sync {
    fn fetch(&self, url: &str, timeout: Duration) -> Result<String, FetchError>;
}

impl<F> Fetcher for F
where
    F: Fn(&str, Duration) -> Result<String, FetchError> + Send + Sync,
{
    fn fetch(&self, url: &str, timeout: Duration) -> Result<String, FetchError> {
        self(url, timeout)
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("no sources configured")]
    NoSources,
    #[error("{0} must be positive")]
    ZeroInterval(&'static str),
    #[error(transparent)]
    Rules(#[from] RuleError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceConfig {
    #[serde(default)]
    pub sources: Vec<String>,
    #[serde(default = "default_poll_interval")]
    pub poll_interval_seconds: u64,
    #[serde(default = "default_fetch_timeout")]
    pub fetch_timeout_seconds: u64,
    /// JSON-lines log of sync reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_path: Option<PathBuf>,
}

fn default_poll_interval() -> u64 {
    86_400
}

fn default_fetch_timeout() -> u64 {
    30
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            sources: Vec::new(),
            poll_interval_seconds: default_poll_interval(),
            fetch_timeout_seconds: default_fetch_timeout(),
            log_path: None,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.poll_interval_seconds == 0 {
            return Err(AgentError::ZeroInterval("poll_interval_seconds"));
        }
        if self.fetch_timeout_seconds == 0 {
            return Err(AgentError::ZeroInterval("fetch_timeout_seconds"));
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus a nonempty source list.
    pub fn validate_for_sync(&self) -> Result<(), AgentError> {
        self.validate()?;
        if self.sources.is_empty() {
            return Err(AgentError::NoSources);
        }
        Ok(())
    }

    pub fn poll_interval(&self) -> Duration {
        Duration::from_secs(self.poll_interval_seconds)
    }

    pub fn fetch_timeout(&self) -> Duration {
        Duration::from_secs(self.fetch_timeout_seconds)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceReport {
    pub url: String,
    pub fetched: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub candidates: usize,
    pub added: usize,
    pub skipped_duplicates: usize,
    pub malformed: usize,
    /// Duplicates whose conclusion or solution differ from the stored rule.
    #[serde(default)]
    pub conflicts: usize,
}

impl SourceReport {
    fn unfetched(url: &str, error: String) -> Self {
        Self {
            url: url.to_string(),
            fetched: false,
            error: Some(error),
            candidates: 0,
            added: 0,
            skipped_duplicates: 0,
            malformed: 0,
            conflicts: 0,
        }
    }

    pub fn is_balanced(&self) -> bool {
        self.candidates == self.added + self.skipped_duplicates + self.malformed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncReport {
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub sources: Vec<SourceReport>,
}

impl SyncReport {
    pub fn added(&self) -> usize {
        self.sources.iter().map(|s| s.added).sum()
    }

    pub fn skipped_duplicates(&self) -> usize {
        self.sources.iter().map(|s| s.skipped_duplicates).sum()
    }

    pub fn malformed(&self) -> usize {
        self.sources.iter().map(|s| s.malformed).sum()
    }

    pub fn candidates(&self) -> usize {
        self.sources.iter().map(|s| s.candidates).sum()
    }

    pub fn is_balanced(&self) -> bool {
        self.sources.iter().all(SourceReport::is_balanced)
    }
}

/// Splits candidates into (new, duplicate), preserving order. A candidate is
/// a duplicate if its condition pair is in `rulebase` or appeared earlier in
/// `candidates`.
pub fn dedup(candidates: Vec<RuleDraft>, rulebase: &RuleBase) -> (Vec<RuleDraft>, Vec<RuleDraft>) {
    let mut seen: HashSet<(String, String)> =
        rulebase.rules().iter().map(|r| r.pair_key()).collect();
    candidates
        .into_iter()
        .partition(|candidate| seen.insert(candidate.pair_key()))
}

type Page = (String, Result<String, FetchError>);

fn fetch_all(config: &SourceConfig, fetcher: &dyn Fetcher) -> Vec<Page> {
    config
        .sources
        .iter()
        .map(|url| (url.clone(), fetcher.fetch(url, config.fetch_timeout())))
        .collect()
}

fn apply_pages(rulebase: &mut RuleBase, pages: Vec<Page>) -> Vec<SourceReport> {
    pages
        .into_iter()
        .map(|(url, page)| {
            let html = match page {
                Ok(html) => html,
                Err(e) => {
                    tracing::warn!(%url, error = %e, "source fetch failed");
                    return SourceReport::unfetched(&url, e.0);
                }
            };
            let extraction = extract_rules(&html);
            let mut report = SourceReport {
                url,
                fetched: true,
                error: None,
                candidates: extraction.candidates.len() + extraction.malformed,
                added: 0,
                skipped_duplicates: 0,
                malformed: extraction.malformed,
                conflicts: 0,
            };
            let (fresh, duplicates) = dedup(extraction.candidates, rulebase);
            report.skipped_duplicates = duplicates.len();
            for dup in &duplicates {
                if let Some(existing) = rulebase.find_pair(&dup.condition_a, &dup.condition_b) {
                    if existing.conclusion != dup.conclusion || existing.solution != dup.solution {
                        report.conflicts += 1;
                        tracing::info!(
                            url = %report.url,
                            rule = existing.id,
                            scraped_conclusion = %dup.conclusion,
                            "kept existing rule over conflicting scraped rule"
                        );
                    }
                }
            }
            for candidate in fresh {
                match rulebase.add_rule(&candidate) {
                    Ok(_) => report.added += 1,
                    Err(RuleError::DuplicateRule { .. }) => report.skipped_duplicates += 1,
                    Err(_) => report.malformed += 1,
                }
            }
            report
        })
        .collect()
}

/// One acquisition pass over every configured source. Fetch failures are
/// recorded per source and never abort the pass.
pub fn sync(rulebase: &mut RuleBase, config: &SourceConfig, fetcher: &dyn Fetcher) -> SyncReport {
    let started_at = Utc::now();
    let pages = fetch_all(config, fetcher);
    let sources = apply_pages(rulebase, pages);
    SyncReport {
        started_at,
        finished_at: Utc::now(),
        sources,
    }
}

/// Append-only JSON-lines log of sync reports.
#[derive(Debug, Clone)]
pub struct AgentLog {
    path: PathBuf,
}

impl AgentLog {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, report: &SyncReport) -> std::io::Result<()> {
        let mut line = serde_json::to_string(report).expect("report serializes");
        line.push('\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        file.write_all(line.as_bytes())?;
        file.sync_data()
    }

    /// Last `limit` reports, oldest first. Unparseable lines are skipped.
    pub fn recent(&self, limit: usize) -> std::io::Result<Vec<SyncReport>> {
        let file = match std::fs::File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        let mut out = VecDeque::with_capacity(limit);
        for line in BufReader::new(file).lines() {
            if let Ok(report) = serde_json::from_str(&line?) {
                if out.len() == limit {
                    out.pop_front();
                }
                out.push_back(report);
            }
        }
        Ok(out.into())
    }
}

const RECENT_REPORTS: usize = 100;

/// Owns the acquisition state for a running service: one sync at a time,
/// writes through the shared [`RuleStore`].
pub struct Agent {
    store: Arc<RuleStore>,
    config: SourceConfig,
    fetcher: Arc<dyn Fetcher>,
    log: Option<AgentLog>,
    running: Mutex<()>,
    recent: Mutex<VecDeque<SyncReport>>,
}

impl std::fmt::Debug for Agent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Agent")
            .field("config", &self.config)
            .field("log", &self.log)
            .finish_non_exhaustive()
    }
}

impl Agent {
    pub fn new(store: Arc<RuleStore>, config: SourceConfig, fetcher: Arc<dyn Fetcher>) -> Self {
        let log = config.log_path.clone().map(AgentLog::new);
        Self {
            store,
            config,
            fetcher,
            log,
            running: Mutex::new(()),
            recent: Mutex::new(VecDeque::new()),
        }
    }

    pub fn config(&self) -> &SourceConfig {
        &self.config
    }

    /// Runs a sync, waiting for any sync already in progress.
    pub fn sync_now(&self) -> Result<SyncReport, AgentError> {
        self.config.validate_for_sync()?;
        let _running = self.running.lock().expect("agent lock poisoned");
        self.run_locked()
    }

    /// Runs a sync unless one is already in progress (`Ok(None)`).
    pub fn try_sync(&self) -> Result<Option<SyncReport>, AgentError> {
        self.config.validate_for_sync()?;
        let Ok(_running) = self.running.try_lock() else {
            return Ok(None);
        };
        self.run_locked().map(Some)
    }

    fn run_locked(&self) -> Result<SyncReport, AgentError> {
        let started_at = Utc::now();
        // Network I/O happens before taking the rule-base writer role.
        let pages = fetch_all(&self.config, self.fetcher.as_ref());
        let sources = self
            .store
            .write(|rb| Ok::<_, RuleError>(apply_pages(rb, pages)))?;
        let report = SyncReport {
            started_at,
            finished_at: Utc::now(),
            sources,
        };
        if let Some(log) = &self.log {
            if let Err(e) = log.append(&report) {
                tracing::warn!(path = %log.path().display(), error = %e, "could not append agent log");
            }
        }
        let mut recent = self.recent.lock().expect("agent reports poisoned");
        if recent.len() == RECENT_REPORTS {
            recent.pop_front();
        }
        recent.push_back(report.clone());
        Ok(report)
    }

    /// Reports from this process, oldest first.
    pub fn recent_reports(&self) -> Vec<SyncReport> {
        self.recent
            .lock()
            .expect("agent reports poisoned")
            .iter()
            .cloned()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rule_model::seed_corpus;

    fn draft(a: &str, b: &str) -> RuleDraft {
        RuleDraft::new(a, b, "c", "s")
    }

    #[test]
    fn dedup_against_rulebase() {
        let rb = seed_corpus();
        let (fresh, dups) = dedup(
            vec![
                draft("Audio", "Scratchy Sound"),
                draft("Audio", "Driver Warning"),
            ],
            &rb,
        );
        assert!(fresh.is_empty());
        assert_eq!(dups.len(), 2);
    }

    #[test]
    fn dedup_within_list() {
        let (fresh, dups) = dedup(
            vec![draft("A", "B"), draft("C", "D"), draft("a", " b ")],
            &RuleBase::new(),
        );
        assert_eq!(fresh, vec![draft("A", "B"), draft("C", "D")]);
        assert_eq!(dups, vec![draft("a", " b ")]);
    }

    #[test]
    fn dedup_is_case_insensitive() {
        let (fresh, dups) = dedup(
            vec![draft("HARD DISK", "smart warning displayed")],
            &seed_corpus(),
        );
        assert!(fresh.is_empty());
        assert_eq!(dups.len(), 1);
    }

    #[test]
    fn unreachable_sources() {
        let config = SourceConfig {
            sources: vec!["http://a.invalid/".into(), "http://b.invalid/".into()],
            ..Default::default()
        };
        let fetcher = |_: &str, _: Duration| Err(FetchError("unreachable".into()));
        let mut rb = seed_corpus();
        let report = sync(&mut rb, &config, &fetcher);
        assert_eq!(report.added(), 0);
        assert!(report
            .sources
            .iter()
            .all(|s| !s.fetched && s.error.is_some()));
        assert_eq!(rb.version(), 33);
    }

    #[test]
    fn conflicting_rule_keeps_existing() {
        let page = r#"<table class="kb-rules"><tr><th>h</th></tr>
            <tr><td>Audio</td><td>Scratchy Sound</td><td>Bad Cable</td><td>Replace Cable</td></tr></table>"#;
        let config = SourceConfig {
            sources: vec!["mem://x".into()],
            ..Default::default()
        };
        let fetcher = move |_: &str, _: Duration| Ok(page.to_string());
        let mut rb = seed_corpus();
        let report = sync(&mut rb, &config, &fetcher);
        assert_eq!(report.sources[0].skipped_duplicates, 1);
        assert_eq!(report.sources[0].conflicts, 1);
        assert_eq!(
            rb.find_pair("Audio", "Scratchy Sound").unwrap().conclusion,
            "Signal Interference"
        );
    }

    #[test]
    fn config_validation() {
        let mut config = SourceConfig::default();
        assert!(matches!(
            config.validate_for_sync(),
            Err(AgentError::NoSources)
        ));
        config.sources.push("x".into());
        config.poll_interval_seconds = 0;
        assert!(matches!(
            config.validate(),
            Err(AgentError::ZeroInterval(_))
        ));
    }

    #[test]
    fn log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let log = AgentLog::new(dir.path().join("agent.jsonl"));
        assert!(log.recent(5).unwrap().is_empty());
        let report = SyncReport {
            started_at: Utc::now(),
            finished_at: Utc::now(),
            sources: vec![SourceReport::unfetched("u", "e".into())],
        };
        log.append(&report).unwrap();
        log.append(&report).unwrap();
        let text = std::fs::read_to_string(log.path()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(log.recent(1).unwrap(), vec![report]);
    }
}
