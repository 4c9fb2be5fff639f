//! Two-level question tree compiled from a rule base.
//!
//! The root asks for the problem category (`if` column); each category node
//! asks for the symptom (`and` column); leaves hold the rule's diagnosis.

use serde::Serialize;

use super::InferenceError;
use crate::rule_model::{match_key, Diagnosis, RuleBase};

pub const CATEGORY_QUESTION: &str = "What type of problem are you having?";
pub const SYMPTOM_QUESTION: &str = "Which symptom do you observe?";

/// A question with its answer options, in display order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Question {
    pub text: String,
    pub options: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Question {
        text: String,
        edges: Vec<(String, Node)>,
    },
    Leaf(Diagnosis),
}

impl Node {
    /// The question at this node, or `None` for a leaf.
    pub fn question(&self) -> Option<Question> {
        match self {
            Node::Question { text, edges } => Some(Question {
                text: text.clone(),
                options: edges.iter().map(|(label, _)| label.clone()).collect(),
            }),
            Node::Leaf(_) => None,
        }
    }

    /// Follows the edge whose label matches `choice` (normalized, case-insensitive).
    pub fn child(&self, choice: &str) -> Option<(usize, &Node)> {
        let Node::Question { edges, .. } = self else {
            return None;
        };
        let key = match_key(choice);
        edges
            .iter()
            .enumerate()
            .find(|(_, (label, _))| match_key(label) == key)
            .map(|(i, (_, node))| (i, node))
    }

    pub fn leaves(&self) -> Vec<&Diagnosis> {
        match self {
            Node::Leaf(d) => vec![d],
            Node::Question { edges, .. } => edges.iter().flat_map(|(_, n)| n.leaves()).collect(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Question { edges, .. } => {
                1 + edges.iter().map(|(_, n)| n.depth()).max().unwrap_or(0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionTree {
    pub rulebase_version: u64,
    pub root: Node,
}

impl DecisionTree {
    /// Node reached by following edge indices from the root.
    pub fn node_at(&self, path: &[usize]) -> Option<&Node> {
        path.iter().try_fold(&self.root, |node, &i| match node {
            Node::Question { edges, .. } => edges.get(i).map(|(_, n)| n),
            Node::Leaf(_) => None,
        })
    }
}

/// Groups `items` by normalized label, keeping the first spelling seen, and
/// sorts groups by the normalized label.
fn group_by_label<T>(items: impl IntoIterator<Item = (String, T)>) -> Vec<(String, Vec<T>)> {
    let mut groups: Vec<(String, String, Vec<T>)> = Vec::new();
    for (label, item) in items {
        let key = match_key(&label);
        match groups.iter_mut().find(|(k, _, _)| *k == key) {
            Some((_, _, members)) => members.push(item),
            None => groups.push((key, label, vec![item])),
        }
    }
    groups.sort_by(|a, b| a.0.cmp(&b.0));
    groups
        .into_iter()
        .map(|(_, label, members)| (label, members))
        .collect()
}

pub fn build_decision_tree(rulebase: &RuleBase) -> Result<DecisionTree, InferenceError> {
    if rulebase.is_empty() {
        return Err(InferenceError::EmptyRuleBase);
    }
    let categories = group_by_label(rulebase.rules().iter().map(|r| (r.condition_a.clone(), r)));
    let edges = categories
        .into_iter()
        .map(|(category, rules)| {
            let symptoms = group_by_label(rules.into_iter().map(|r| (r.condition_b.clone(), r)));
            let edges = symptoms
                .into_iter()
                .map(|(symptom, mut rules)| {
                    // Pair uniqueness leaves exactly one rule per (category, symptom).
                    debug_assert_eq!(rules.len(), 1);
                    (symptom, Node::Leaf(rules.remove(0).diagnosis()))
                })
                .collect();
            (
                category,
                Node::Question {
                    text: SYMPTOM_QUESTION.to_string(),
                    edges,
                },
            )
        })
        .collect();
    Ok(DecisionTree {
        rulebase_version: rulebase.version(),
        root: Node::Question {
            text: CATEGORY_QUESTION.to_string(),
            edges,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rule_model::{seed_corpus, RuleDraft};

    #[test]
    fn seed_tree_root() {
        let tree = build_decision_tree(&seed_corpus()).unwrap();
        let q = tree.root.question().unwrap();
        assert_eq!(q.text, CATEGORY_QUESTION);
        assert_eq!(
            q.options,
            [
                "Audio",
                "BIOS",
                "Hard Disk",
                "Keyboard",
                "Mouse",
                "Power Supply",
                "Processor",
                "Serial ATA",
                "Startup"
            ]
        );
        assert_eq!(tree.root.depth(), 2);
        assert_eq!(tree.root.leaves().len(), 33);
    }

    #[test]
    fn seed_tree_path() {
        let tree = build_decision_tree(&seed_corpus()).unwrap();
        let (_, disk) = tree.root.child("Hard Disk").unwrap();
        assert_eq!(disk.question().unwrap().text, SYMPTOM_QUESTION);
        let (_, leaf) = disk.child("Invalid Media Type Error").unwrap();
        match leaf {
            Node::Leaf(d) => {
                assert_eq!(d.conclusion, "Drive not Yet Formatted");
                assert_eq!(d.solution, "Format your Drive");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_rule_tree() {
        let mut rb = RuleBase::new();
        rb.add_rule(&RuleDraft::new("A", "B", "C", "D")).unwrap();
        let tree = build_decision_tree(&rb).unwrap();
        let (_, cat) = tree.root.child("a").unwrap();
        assert_eq!(cat.question().unwrap().options, ["B"]);
        assert_eq!(tree.root.leaves().len(), 1);
    }

    #[test]
    fn empty_base() {
        assert_eq!(
            build_decision_tree(&RuleBase::new()),
            Err(InferenceError::EmptyRuleBase)
        );
    }

    #[test]
    fn first_spelling_wins_and_edges_are_sorted() {
        let mut rb = RuleBase::new();
        rb.add_rule(&RuleDraft::new("mouse", "z symptom", "c", "d"))
            .unwrap();
        rb.add_rule(&RuleDraft::new("Audio", "x", "c", "d"))
            .unwrap();
        rb.add_rule(&RuleDraft::new("MOUSE", "a symptom", "c", "d"))
            .unwrap();
        let tree = build_decision_tree(&rb).unwrap();
        assert_eq!(tree.root.question().unwrap().options, ["Audio", "mouse"]);
        let (_, mouse) = tree.root.child("Mouse").unwrap();
        assert_eq!(
            mouse.question().unwrap().options,
            ["a symptom", "z symptom"]
        );
    }
}
