//! Knowledge-based PC troubleshooting.
//!
//! The crate is split along the lines of a classic production-rule expert
//! system:
//!
//! * [`rule_model`] holds the two-condition production rules, the versioned
//!   rule base, its on-disk JSON format and the built-in seed corpus.
//! * [`inference`] runs forward chaining over working memory and compiles the
//!   rule base into the question tree that drives interactive sessions.
//! * [`fuzzy`] classifies POST beep durations into linguistic values and maps
//!   them to POST fault messages.
//! * [`agent`] scrapes `kb-rules` tables from HTML pages and merges new rules
//!   into the rule base.

pub mod agent;
pub mod fuzzy;
pub mod inference;
pub mod rule_model;

pub use rule_model::{normalize, Diagnosis, Fact, Rule, RuleBase, RuleError, RuleStore};
