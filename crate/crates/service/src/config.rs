//! Service configuration file.

use std::path::{Path, PathBuf};

use kbts_core::agent::SourceConfig;
use kbts_core::fuzzy::{FuzzyBreakpoints, MembershipFunction};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen_addr")]
    pub listen_addr: String,
    #[serde(default = "default_rulebase_path")]
    pub rulebase_path: PathBuf,
    #[serde(default)]
    pub seed_if_missing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fuzzy_breakpoints: Option<FuzzyBreakpoints>,
    #[serde(default)]
    pub agent: SourceConfig,
    #[serde(default = "default_session_idle_timeout")]
    pub session_idle_timeout_seconds: u64,
}

fn default_listen_addr() -> String {
    "127.0.0.1:8080".into()
}

fn default_rulebase_path() -> PathBuf {
    "rules.json".into()
}

fn default_session_idle_timeout() -> u64 {
    1800
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen_addr: default_listen_addr(),
            rulebase_path: default_rulebase_path(),
            seed_if_missing: false,
            fuzzy_breakpoints: None,
            agent: SourceConfig::default(),
            session_idle_timeout_seconds: default_session_idle_timeout(),
        }
    }
}

impl ServiceConfig {
    /// Reads and validates a config file. Relative paths inside it resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: ServiceConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.to_path_buf(),
                source,
            })?;
        if config.rulebase_path.as_os_str().is_empty() {
            return Err(ConfigError::Invalid("rulebase_path is empty".into()));
        }
        if let Some(base) = path.parent() {
            config.rulebase_path = base.join(&config.rulebase_path);
            config.agent.log_path = config.agent.log_path.map(|p| base.join(p));
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.listen_addr.trim().is_empty() {
            return Err(ConfigError::Invalid("listen_addr is empty".into()));
        }
        if self.rulebase_path.as_os_str().is_empty() {
            return Err(ConfigError::Invalid("rulebase_path is empty".into()));
        }
        if self.session_idle_timeout_seconds == 0 {
            return Err(ConfigError::Invalid(
                "session_idle_timeout_seconds must be positive".into(),
            ));
        }
        self.agent
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.membership()?;
        Ok(())
    }

    pub fn membership(&self) -> Result<MembershipFunction, ConfigError> {
        match &self.fuzzy_breakpoints {
            Some(bp) => MembershipFunction::from_breakpoints(bp)
                .map_err(|e| ConfigError::Invalid(e.to_string())),
            None => Ok(MembershipFunction::default()),
        }
    }

    /// Agent log location: configured, or next to the rule base.
    pub fn agent_log_path(&self) -> PathBuf {
        self.agent.log_path.clone().unwrap_or_else(|| {
            let mut name = self
                .rulebase_path
                .file_stem()
                .map(|s| s.to_os_string())
                .unwrap_or_else(|| "rules".into());
            name.push(".agent.jsonl");
            self.rulebase_path.with_file_name(name)
        })
    }
}
