//! Production rules, facts and the versioned rule base.
//!
//! A rule has the shape `IF <category> AND <symptom> THEN <cause> -> <repair>`.
//! The rule base keeps rules sorted by id, refuses two rules with the same
//! (case-insensitive, whitespace-normalized) condition pair and bumps its
//! version on every successful mutation.

mod file;
mod seed;
mod store;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use file::{load, parse, save, to_canonical_json};
pub use seed::seed_corpus;
pub use store::RuleStore;

/// Trims the text and collapses every internal whitespace run to one space.
///
/// Case is preserved; comparisons elsewhere go through [`match_key`].
pub fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Comparison key: normalized and case-folded.
pub fn match_key(text: &str) -> String {
    normalize(text).to_lowercase()
}

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("field `{0}` is empty")]
    EmptyField(&'static str),
    #[error("a rule for ({condition_a:?}, {condition_b:?}) already exists as rule {existing_id}")]
    DuplicateRule {
        condition_a: String,
        condition_b: String,
        existing_id: u64,
    },
    #[error("rule {0} not found")]
    NotFound(u64),
    #[error("parse error at {position}: {message}")]
    Parse { position: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = RuleError> = std::result::Result<T, E>;

/// One production rule. Serialized with the column names of the rule table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub id: u64,
    #[serde(rename = "if")]
    pub condition_a: String,
    #[serde(rename = "and")]
    pub condition_b: String,
    #[serde(rename = "then")]
    pub conclusion: String,
    pub solution: String,
}

impl Rule {
    /// The uniqueness key of the rule within a rule base.
    pub fn pair_key(&self) -> (String, String) {
        (match_key(&self.condition_a), match_key(&self.condition_b))
    }

    pub fn diagnosis(&self) -> Diagnosis {
        Diagnosis {
            rule_id: self.id,
            conclusion: self.conclusion.clone(),
            solution: self.solution.clone(),
        }
    }
}

/// The four user-supplied columns of a rule, before the store assigns an id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleDraft {
    #[serde(rename = "if")]
    pub condition_a: String,
    #[serde(rename = "and")]
    pub condition_b: String,
    #[serde(rename = "then")]
    pub conclusion: String,
    pub solution: String,
}

impl RuleDraft {
    pub fn new(
        condition_a: impl Into<String>,
        condition_b: impl Into<String>,
        conclusion: impl Into<String>,
        solution: impl Into<String>,
    ) -> Self {
        Self {
            condition_a: condition_a.into(),
            condition_b: condition_b.into(),
            conclusion: conclusion.into(),
            solution: solution.into(),
        }
    }

    /// Normalizes all four fields, rejecting any that end up empty.
    pub fn normalized(&self) -> Result<RuleDraft> {
        Ok(RuleDraft {
            condition_a: non_empty("if", &self.condition_a)?,
            condition_b: non_empty("and", &self.condition_b)?,
            conclusion: non_empty("then", &self.conclusion)?,
            solution: non_empty("solution", &self.solution)?,
        })
    }

    pub fn pair_key(&self) -> (String, String) {
        (match_key(&self.condition_a), match_key(&self.condition_b))
    }
}

/// Partial replacement of a rule's fields; `None` keeps the current value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleUpdate {
    #[serde(rename = "if", default, skip_serializing_if = "Option::is_none")]
    pub condition_a: Option<String>,
    #[serde(rename = "and", default, skip_serializing_if = "Option::is_none")]
    pub condition_b: Option<String>,
    #[serde(rename = "then", default, skip_serializing_if = "Option::is_none")]
    pub conclusion: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<String>,
}

fn non_empty(field: &'static str, text: &str) -> Result<String> {
    let text = normalize(text);
    if text.is_empty() {
        Err(RuleError::EmptyField(field))
    } else {
        Ok(text)
    }
}

/// An attribute/value assertion in working memory.
///
/// Equality and hashing use the normalized, case-folded slot and value, so
/// `("category", "hard   disk")` and `("Category", "Hard Disk")` are the same
/// fact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fact {
    pub slot: String,
    pub value: String,
}

impl Fact {
    /// Builds a normalized fact. Returns `None` if either part is blank.
    pub fn new(slot: &str, value: &str) -> Option<Self> {
        let slot = normalize(slot);
        let value = normalize(value);
        (!slot.is_empty() && !value.is_empty()).then_some(Self { slot, value })
    }

    pub fn value_key(&self) -> String {
        match_key(&self.value)
    }

    fn key(&self) -> (String, String) {
        (match_key(&self.slot), match_key(&self.value))
    }
}

impl PartialEq for Fact {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Fact {}

impl std::hash::Hash for Fact {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key().hash(state)
    }
}

/// A conclusion reached for a single rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub rule_id: u64,
    pub conclusion: String,
    pub solution: String,
}

/// Versioned collection of rules, sorted by ascending id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleBase {
    version: u64,
    rules: Vec<Rule>,
    // Highest id ever handed out by this value; keeps deleted ids retired.
    high_water: u64,
}

impl Default for RuleBase {
    fn default() -> Self {
        Self::new()
    }
}

impl RuleBase {
    pub fn new() -> Self {
        Self {
            version: 0,
            rules: Vec::new(),
            high_water: 0,
        }
    }

    /// Builds a rule base from stored records, checking every rule invariant.
    ///
    /// Fields are normalized on the way in. Errors name the offending record
    /// index (0-based).
    pub fn from_records(version: u64, records: Vec<Rule>) -> Result<Self> {
        let mut rules: Vec<Rule> = Vec::with_capacity(records.len());
        let mut seen: std::collections::HashMap<(String, String), usize> =
            std::collections::HashMap::new();
        for (index, record) in records.into_iter().enumerate() {
            let at = |message: String| RuleError::Parse {
                position: format!("record {index}"),
                message,
            };
            if record.id == 0 {
                return Err(at("rule id must be a positive integer".into()));
            }
            if let Some(previous) = rules.last() {
                if record.id <= previous.id {
                    return Err(at(format!(
                        "rule id {} is not greater than the preceding id {}",
                        record.id, previous.id
                    )));
                }
            }
            let draft = RuleDraft::new(
                record.condition_a,
                record.condition_b,
                record.conclusion,
                record.solution,
            )
            .normalized()
            .map_err(|e| at(e.to_string()))?;
            if let Some(first) = seen.insert(draft.pair_key(), index) {
                return Err(at(format!(
                    "duplicate condition pair ({:?}, {:?}) also used by record {first}",
                    draft.condition_a, draft.condition_b
                )));
            }
            rules.push(Rule {
                id: record.id,
                condition_a: draft.condition_a,
                condition_b: draft.condition_b,
                conclusion: draft.conclusion,
                solution: draft.solution,
            });
        }
        let high_water = rules.last().map_or(0, |r| r.id);
        Ok(Self {
            version,
            rules,
            high_water,
        })
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&Rule> {
        self.position(id).map(|i| &self.rules[i])
    }

    /// Looks up a rule by its condition pair (normalized, case-insensitive).
    pub fn find_pair(&self, condition_a: &str, condition_b: &str) -> Option<&Rule> {
        let key = (match_key(condition_a), match_key(condition_b));
        self.rules.iter().find(|r| r.pair_key() == key)
    }

    fn position(&self, id: u64) -> Option<usize> {
        self.rules.binary_search_by_key(&id, |r| r.id).ok()
    }

    fn check_pair(&self, draft: &RuleDraft, ignore_id: Option<u64>) -> Result<()> {
        let key = draft.pair_key();
        match self
            .rules
            .iter()
            .find(|r| Some(r.id) != ignore_id && r.pair_key() == key)
        {
            Some(existing) => Err(RuleError::DuplicateRule {
                condition_a: draft.condition_a.clone(),
                condition_b: draft.condition_b.clone(),
                existing_id: existing.id,
            }),
            None => Ok(()),
        }
    }

    /// Appends a new rule with the next unused id.
    pub fn add_rule(&mut self, draft: &RuleDraft) -> Result<Rule> {
        let draft = draft.normalized()?;
        self.check_pair(&draft, None)?;
        let id = self.high_water + 1;
        let rule = Rule {
            id,
            condition_a: draft.condition_a,
            condition_b: draft.condition_b,
            conclusion: draft.conclusion,
            solution: draft.solution,
        };
        self.rules.push(rule.clone());
        self.high_water = id;
        self.version += 1;
        Ok(rule)
    }

    /// Replaces the given fields of rule `id` in place.
    pub fn update_rule(&mut self, id: u64, update: &RuleUpdate) -> Result<Rule> {
        let index = self.position(id).ok_or(RuleError::NotFound(id))?;
        let current = &self.rules[index];
        let pick = |new: &Option<String>, old: &String| new.clone().unwrap_or_else(|| old.clone());
        let draft = RuleDraft {
            condition_a: pick(&update.condition_a, &current.condition_a),
            condition_b: pick(&update.condition_b, &current.condition_b),
            conclusion: pick(&update.conclusion, &current.conclusion),
            solution: pick(&update.solution, &current.solution),
        }
        .normalized()?;
        self.check_pair(&draft, Some(id))?;
        let rule = Rule {
            id,
            condition_a: draft.condition_a,
            condition_b: draft.condition_b,
            conclusion: draft.conclusion,
            solution: draft.solution,
        };
        self.rules[index] = rule.clone();
        self.version += 1;
        Ok(rule)
    }

    pub fn delete_rule(&mut self, id: u64) -> Result<()> {
        let index = self.position(id).ok_or(RuleError::NotFound(id))?;
        self.rules.remove(index);
        self.version += 1;
        Ok(())
    }

    /// Distinct categories in order of first appearance, original spelling.
    pub fn categories(&self) -> Vec<&str> {
        let mut seen = std::collections::HashSet::new();
        self.rules
            .iter()
            .filter(|r| seen.insert(match_key(&r.condition_a)))
            .map(|r| r.condition_a.as_str())
            .collect()
    }
}
