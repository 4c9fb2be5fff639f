//! Forward chaining and the interactive question tree.

mod engine;
mod session;
mod tree;

pub use engine::{
    forward_chain, forward_chain_productions, match_rule, resolve_conflicts, Production,
    WorkingMemory, CONCLUSION_SLOT,
};
pub use session::{start_session, Session, SessionError, Step};
pub use tree::{
    build_decision_tree, DecisionTree, Node, Question, CATEGORY_QUESTION, SYMPTOM_QUESTION,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InferenceError {
    #[error("the rule base is empty")]
    EmptyRuleBase,
}
