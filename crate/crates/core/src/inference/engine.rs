//! Recognize-act forward chaining.
//!
//! Each cycle collects the rules whose conditions are all present in working
//! memory, orders them with [`resolve_conflicts`], fires the first one and
//! asserts its conclusion as a new fact. The run stops when no unfired rule
//! matches. Refraction (a rule fires at most once) bounds the number of
//! cycles by the number of rules.

use std::collections::{BTreeSet, HashSet};

use crate::rule_model::{match_key, Diagnosis, Fact, Rule, RuleBase};

/// Slot name used for facts asserted by fired rules.
pub const CONCLUSION_SLOT: &str = "conclusion";

/// A rule as the engine sees it: any number of conditions, all of which must
/// hold. Stored rules always have two.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Production {
    pub id: u64,
    pub conditions: Vec<String>,
    pub conclusion: String,
    pub solution: String,
}

impl Production {
    pub fn new(
        id: u64,
        conditions: impl IntoIterator<Item = impl Into<String>>,
        conclusion: impl Into<String>,
        solution: impl Into<String>,
    ) -> Self {
        Self {
            id,
            conditions: conditions.into_iter().map(Into::into).collect(),
            conclusion: conclusion.into(),
            solution: solution.into(),
        }
    }

    fn diagnosis(&self) -> Diagnosis {
        Diagnosis {
            rule_id: self.id,
            conclusion: self.conclusion.clone(),
            solution: self.solution.clone(),
        }
    }
}

impl From<&Rule> for Production {
    fn from(rule: &Rule) -> Self {
        Production::new(
            rule.id,
            [rule.condition_a.clone(), rule.condition_b.clone()],
            rule.conclusion.clone(),
            rule.solution.clone(),
        )
    }
}

/// Facts known so far plus the refraction record.
#[derive(Debug, Clone, Default)]
pub struct WorkingMemory {
    facts: HashSet<Fact>,
    values: HashSet<String>,
    fired: BTreeSet<u64>,
}

impl WorkingMemory {
    pub fn new(facts: impl IntoIterator<Item = Fact>) -> Self {
        let mut memory = Self::default();
        for fact in facts {
            memory.assert_fact(fact);
        }
        memory
    }

    /// Adds a fact; returns false if an equal fact was already present.
    pub fn assert_fact(&mut self, fact: Fact) -> bool {
        self.values.insert(fact.value_key());
        self.facts.insert(fact)
    }

    /// Whether any fact, regardless of slot, carries this value.
    pub fn has_value(&self, text: &str) -> bool {
        self.values.contains(&match_key(text))
    }

    pub fn facts(&self) -> &HashSet<Fact> {
        &self.facts
    }

    pub fn has_fired(&self, id: u64) -> bool {
        self.fired.contains(&id)
    }

    pub fn fired(&self) -> &BTreeSet<u64> {
        &self.fired
    }
}

fn matches(production: &Production, memory: &WorkingMemory) -> bool {
    production.conditions.iter().all(|c| memory.has_value(c))
}

/// True iff both conditions of `rule` appear among the fact values.
/// Slot names are not consulted.
pub fn match_rule(rule: &Rule, memory: &WorkingMemory) -> bool {
    memory.has_value(&rule.condition_a) && memory.has_value(&rule.condition_b)
}

/// Drops already-fired rules, then orders by descending condition count and
/// ascending id. The result is a total order over distinct ids.
pub fn resolve_conflicts<'a>(
    candidates: impl IntoIterator<Item = &'a Production>,
    memory: &WorkingMemory,
) -> Vec<&'a Production> {
    let mut ordered: Vec<&Production> = candidates
        .into_iter()
        .filter(|p| !memory.has_fired(p.id))
        .collect();
    ordered.sort_by(|x, y| {
        y.conditions
            .len()
            .cmp(&x.conditions.len())
            .then(x.id.cmp(&y.id))
    });
    ordered
}

/// Runs to fixpoint over `productions`, updating `memory` in place.
/// Returns diagnoses in firing order.
pub fn forward_chain_productions(
    productions: &[Production],
    memory: &mut WorkingMemory,
) -> Vec<Diagnosis> {
    let mut fired = Vec::new();
    loop {
        let candidates = productions.iter().filter(|p| matches(p, memory));
        let Some(selected) = resolve_conflicts(candidates, memory).into_iter().next() else {
            break;
        };
        tracing::trace!(rule = selected.id, "firing");
        memory.fired.insert(selected.id);
        if let Some(fact) = Fact::new(CONCLUSION_SLOT, &selected.conclusion) {
            memory.assert_fact(fact);
        }
        fired.push(selected.diagnosis());
    }
    fired
}

/// Forward chaining over a rule-base snapshot starting from `facts`.
pub fn forward_chain(rulebase: &RuleBase, facts: impl IntoIterator<Item = Fact>) -> Vec<Diagnosis> {
    let productions: Vec<Production> = rulebase.rules().iter().map(Production::from).collect();
    let mut memory = WorkingMemory::new(facts);
    forward_chain_productions(&productions, &mut memory)
}
