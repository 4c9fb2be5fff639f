//! A user's walk through the question tree.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use super::tree::{build_decision_tree, DecisionTree, Node, Question};
use super::InferenceError;
use crate::rule_model::{Diagnosis, RuleBase};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SessionError {
    #[error("invalid choice {choice:?}; valid options: {valid_options:?}")]
    InvalidChoice {
        choice: String,
        valid_options: Vec<String>,
    },
    #[error("session is closed")]
    SessionClosed,
}

/// What the session presents after an answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Question(Question),
    Diagnosis(Diagnosis),
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    tree: Arc<DecisionTree>,
    cursor: Vec<usize>,
    transcript: Vec<(String, String)>,
    closed: bool,
}

impl Session {
    /// Opens a session at the root of an already-built tree.
    pub fn new(tree: Arc<DecisionTree>) -> (Self, Question) {
        let question = tree.root.question().expect("tree root is a question");
        let session = Self {
            id: uuid::Uuid::new_v4().to_string(),
            tree,
            cursor: Vec::new(),
            transcript: Vec::new(),
            closed: false,
        };
        (session, question)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Rule-base version the session's tree was compiled from.
    pub fn tree_version(&self) -> u64 {
        self.tree.rulebase_version
    }

    pub fn transcript(&self) -> &[(String, String)] {
        &self.transcript
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    fn node(&self) -> &Node {
        self.tree
            .node_at(&self.cursor)
            .expect("cursor stays inside the tree")
    }

    /// The pending question, if the session is still open.
    pub fn current_question(&self) -> Option<Question> {
        if self.closed {
            None
        } else {
            self.node().question()
        }
    }

    pub fn answer(&mut self, choice: &str) -> Result<Step, SessionError> {
        if self.closed {
            return Err(SessionError::SessionClosed);
        }
        let node = self.node();
        let question = node.question().expect("open session sits on a question");
        let Some((index, next)) = node.child(choice) else {
            return Err(SessionError::InvalidChoice {
                choice: choice.to_string(),
                valid_options: question.options,
            });
        };
        let label = question.options[index].clone();
        let step = match next {
            Node::Leaf(diagnosis) => Step::Diagnosis(diagnosis.clone()),
            Node::Question { .. } => Step::Question(next.question().expect("question node")),
        };
        self.cursor.push(index);
        self.transcript.push((question.text, label));
        if matches!(step, Step::Diagnosis(_)) {
            self.closed = true;
        }
        Ok(step)
    }
}

/// Compiles the tree for `rulebase` and opens a session on it.
pub fn start_session(rulebase: &RuleBase) -> Result<(Session, Question), InferenceError> {
    let tree = build_decision_tree(rulebase)?;
    Ok(Session::new(Arc::new(tree)))
}
