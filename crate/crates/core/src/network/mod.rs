//! Dynamic Bayesian-network construction over EIDs.
//!
//! Nodes are EIDs. An inferred node's parents are every EID whose type its
//! rule selects, and its CPT is obtained by running the rule on the concrete
//! history induced by each joint parent assignment. The network is updated
//! incrementally as explicit events arrive; see [`BayesNetwork::on_event_arrival`].
//!
//! Inferred nodes take the current inference time (the latest occurrence
//! time ingested) as their occurrence time. When that time advances, or a
//! parent's domain changes, or new candidates arrive, the node's parents and
//! CPT are rebuilt. Rebuilding repeats until nothing changes.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::assign::{self, Odometer};
use crate::distribution::Distribution;
use crate::event::{Eid, EidKind, EidState, HistoryKey, ModelError, Timestamp, PROB_TOLERANCE};
use crate::rules::{rule_eval_order, Rule, RuleSet};
use crate::semantics::{
    rule_world_outcome, ConcreteHistory, HistoryEntry, RuleOutcome, SemanticsError,
};

mod dot;
mod elimination;

pub use elimination::Factor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("EID id {0} already present")]
    DuplicateId(String),
    #[error("EID {0} is not explicit")]
    NotExplicit(String),
    #[error("no EID with id {0}")]
    UnknownId(String),
    #[error("EID {id} shares its history key {key:?} with {other}")]
    DuplicateKey {
        id: String,
        other: String,
        key: HistoryKey,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error("CPT row {row} of {id} does not exist or has the wrong width")]
    BadRow { id: String, row: usize },
}

/// Id of the EID inferred by rule `rule_id`.
pub fn inferred_eid_id(rule_id: &str) -> String {
    format!("E_{rule_id}")
}

/// Conditional probability table: one distribution over the child's domain
/// per joint parent assignment, rows in row-major order (last parent fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    parent_cards: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn prior(prior: Vec<f64>) -> Self {
        Cpt {
            parent_cards: Vec::new(),
            rows: vec![prior],
        }
    }

    pub fn parent_cards(&self) -> &[usize] {
        &self.parent_cards
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// The row for a parent assignment given as state indices.
    pub fn row(&self, assignment: &[usize]) -> &[f64] {
        &self.rows[assign::index_of(&self.parent_cards, assignment)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesNode {
    eid: Eid,
    parents: Vec<String>,
    cpt: Cpt,
    /// Bumped whenever the domain changes, so children know to rebuild.
    revision: u64,
    built_from: Vec<u64>,
    built_now: Timestamp,
}

impl BayesNode {
    pub fn eid(&self) -> &Eid {
        &self.eid
    }

    pub fn parents(&self) -> &[String] {
        &self.parents
    }

    pub fn cpt(&self) -> &Cpt {
        &self.cpt
    }
}

/// What a single arrival changed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ArrivalOutcome {
    pub created: Vec<String>,
    pub rebuilt: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BayesNetwork {
    nodes: Vec<BayesNode>,
    index: BTreeMap<String, usize>,
    /// Candidate lists: node positions per event type.
    by_type: BTreeMap<String, Vec<usize>>,
    now: Timestamp,
    next_inferred_seq: u64,
}

impl BayesNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    /// Latest occurrence time ingested so far.
    pub fn now(&self) -> Timestamp {
        self.now
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().map(|n| n.parents.len()).sum()
    }

    pub fn node(&self, id: &str) -> Option<&BayesNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    /// Nodes in history order.
    pub fn nodes(&self) -> Vec<&BayesNode> {
        let mut nodes: Vec<&BayesNode> = self.nodes.iter().collect();
        nodes.sort_by_key(|n| n.eid.history_key());
        nodes
    }

    pub fn add_explicit_node(&mut self, eid: Eid) -> Result<(), NetworkError> {
        let prior = match eid.kind() {
            EidKind::Explicit { prior } => prior.clone(),
            EidKind::Inferred { .. } => return Err(NetworkError::NotExplicit(eid.id().into())),
        };
        if self.index.contains_key(eid.id()) {
            return Err(NetworkError::DuplicateId(eid.id().into()));
        }
        eid.validate_single_occt()?;
        let key = eid.history_key();
        if let Some(other) = self.nodes.iter().find(|n| n.eid.history_key() == key) {
            return Err(NetworkError::DuplicateKey {
                id: eid.id().into(),
                other: other.eid.id().into(),
                key,
            });
        }
        if let Some(t) = eid.occ_t() {
            self.now = self.now.max(t);
        }
        self.insert(BayesNode {
            cpt: Cpt::prior(prior),
            eid,
            parents: Vec::new(),
            revision: 0,
            built_from: Vec::new(),
            built_now: 0,
        });
        Ok(())
    }

    fn insert(&mut self, node: BayesNode) {
        let pos = self.nodes.len();
        self.index.insert(node.eid.id().to_string(), pos);
        self.by_type
            .entry(node.eid.type_name().to_string())
            .or_default()
            .push(pos);
        self.nodes.push(node);
    }

    fn candidate_positions(&self, rule: &Rule) -> Vec<usize> {
        let mut pos: Vec<usize> = self
            .by_type
            .iter()
            .filter(|(ty, _)| rule.selects_type(ty))
            .flat_map(|(_, p)| p.iter().copied())
            .collect();
        pos.sort_by_key(|&p| self.nodes[p].eid.history_key());
        pos
    }

    /// Every EID whose type the rule selects, in history order.
    pub fn candidates(&self, rule: &Rule) -> Vec<&Eid> {
        self.candidate_positions(rule)
            .into_iter()
            .map(|p| &self.nodes[p].eid)
            .collect()
    }

    /// Adds an explicit EID and brings every inferred node up to date.
    pub fn on_event_arrival(
        &mut self,
        eid: Eid,
        rules: &RuleSet,
    ) -> Result<ArrivalOutcome, NetworkError> {
        self.add_explicit_node(eid)?;
        let outcome = self.propagate(rules)?;
        debug_assert!(
            self.check_invariants().is_ok(),
            "{:?}",
            self.check_invariants()
        );
        Ok(outcome)
    }

    fn propagate(&mut self, rules: &RuleSet) -> Result<ArrivalOutcome, NetworkError> {
        let order = rule_eval_order(rules);
        let mut outcome = ArrivalOutcome::default();
        loop {
            let mut changed = false;
            for rule in &order {
                let id = inferred_eid_id(&rule.id);
                let cand_pos = self.candidate_positions(rule);
                match self.index.get(&id).copied() {
                    None => {
                        let cands: Vec<&Eid> =
                            cand_pos.iter().map(|&p| &self.nodes[p].eid).collect();
                        if !possibility_check(rule, &cands)? {
                            continue;
                        }
                        let seq = self.next_inferred_seq;
                        let node = self.build_node(rule, &id, seq, &cand_pos)?;
                        self.next_inferred_seq += 1;
                        self.insert(node);
                        outcome.created.push(id);
                        changed = true;
                    }
                    Some(at) => {
                        if !self.is_stale(at, &cand_pos) {
                            continue;
                        }
                        let old = &self.nodes[at];
                        let mut node = self.build_node(rule, &id, old.eid.seq(), &cand_pos)?;
                        node.revision = if node.eid.domain() == old.eid.domain() {
                            old.revision
                        } else {
                            old.revision + 1
                        };
                        self.nodes[at] = node;
                        if !outcome.rebuilt.contains(&id) {
                            outcome.rebuilt.push(id);
                        }
                        changed = true;
                    }
                }
            }
            if !changed {
                return Ok(outcome);
            }
        }
    }

    fn is_stale(&self, at: usize, cand_pos: &[usize]) -> bool {
        let node = &self.nodes[at];
        node.built_now != self.now
            || node.parents.len() != cand_pos.len()
            || cand_pos
                .iter()
                .zip(&node.parents)
                .zip(&node.built_from)
                .any(|((&p, parent_id), &rev)| {
                    self.nodes[p].eid.id() != parent_id || self.nodes[p].revision != rev
                })
    }

    fn build_node(
        &self,
        rule: &Rule,
        id: &str,
        seq: u64,
        cand_pos: &[usize],
    ) -> Result<BayesNode, NetworkError> {
        let cands: Vec<&Eid> = cand_pos.iter().map(|&p| &self.nodes[p].eid).collect();
        let (domain, cpt) = build_cpt(rule, &cands, self.now)?;
        let eid = Eid::inferred(id, &rule.emit_type, seq, self.now, domain, &rule.id)?;
        Ok(BayesNode {
            eid,
            parents: cands.iter().map(|e| e.id().to_string()).collect(),
            cpt,
            revision: 0,
            built_from: cand_pos.iter().map(|&p| self.nodes[p].revision).collect(),
            built_now: self.now,
        })
    }

    /// Checks the structural invariants: parents precede children in history
    /// order, CPTs have one normalized row per parent assignment, and explicit
    /// nodes carry exactly their prior.
    pub fn check_invariants(&self) -> Result<(), String> {
        for node in &self.nodes {
            let key = node.eid.history_key();
            let mut cards = Vec::new();
            for parent in &node.parents {
                let p = self
                    .node(parent)
                    .ok_or_else(|| format!("{}: unknown parent {parent}", node.eid.id()))?;
                if p.eid.history_key() >= key {
                    return Err(format!(
                        "edge {parent} -> {} goes against history order",
                        node.eid.id()
                    ));
                }
                cards.push(p.eid.domain().len());
            }
            if node.cpt.parent_cards != cards || node.cpt.rows.len() != assign::product(&cards) {
                return Err(format!(
                    "{}: CPT shape does not match parents",
                    node.eid.id()
                ));
            }
            for (r, row) in node.cpt.rows.iter().enumerate() {
                if row.len() != node.eid.domain().len() {
                    return Err(format!("{}: row {r} has the wrong width", node.eid.id()));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > PROB_TOLERANCE {
                    return Err(format!("{}: row {r} sums to {sum}", node.eid.id()));
                }
            }
            if let Some(prior) = node.eid.prior() {
                if !node.parents.is_empty() || node.cpt.rows != [prior.to_vec()] {
                    return Err(format!(
                        "{}: explicit CPT differs from prior",
                        node.eid.id()
                    ));
                }
            }
        }
        Ok(())
    }

    /// Replaces one CPT row without any checks. Meant for fault injection in
    /// tests of the oracle comparison.
    pub fn override_cpt_row(
        &mut self,
        id: &str,
        row: usize,
        values: Vec<f64>,
    ) -> Result<(), NetworkError> {
        let at = *self
            .index
            .get(id)
            .ok_or_else(|| NetworkError::UnknownId(id.into()))?;
        let node = &mut self.nodes[at];
        match node.cpt.rows.get_mut(row) {
            Some(r) if r.len() == values.len() => {
                *r = values;
                Ok(())
            }
            _ => Err(NetworkError::BadRow { id: id.into(), row }),
        }
    }

    /// Exact marginal of one node by variable elimination.
    pub fn marginal(&self, id: &str) -> Result<Distribution, NetworkError> {
        let at = *self
            .index
            .get(id)
            .ok_or_else(|| NetworkError::UnknownId(id.into()))?;
        Ok(elimination::marginal(self, at))
    }

    pub fn export_dot(&self) -> String {
        dot::export(self)
    }

    fn position(&self, id: &str) -> usize {
        self.index[id]
    }
}

fn history_for(cands: &[&Eid], assignment: &[usize]) -> Result<ConcreteHistory, SemanticsError> {
    let entries = cands
        .iter()
        .zip(assignment)
        .filter_map(|(eid, &s)| {
            eid.domain()[s].instance().map(|inst| HistoryEntry {
                origin: eid.origin(),
                instance: inst.clone(),
            })
        })
        .collect();
    ConcreteHistory::new(entries)
}

/// Whether some joint assignment of the candidates makes the rule's pattern
/// hold. Stops at the first such assignment.
pub fn possibility_check(rule: &Rule, cands: &[&Eid]) -> Result<bool, SemanticsError> {
    let cards: Vec<usize> = cands.iter().map(|e| e.domain().len()).collect();
    let mut odo = Odometer::new(&cards);
    while let Some(assignment) = odo.next() {
        let h = history_for(cands, assignment)?;
        // The inference time does not affect whether the pattern holds.
        if let RuleOutcome::Triggered { .. } = rule_world_outcome(rule, &h, 0)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Domain and CPT of the node inferred by `rule` from `cands`.
///
/// A row whose history triggers the rule puts `prob` on the mapped instance
/// and `1 - prob` on `NotOccurred`; every other row is certain non-occurrence.
/// The domain is `NotOccurred` followed by the distinct mapped instances in
/// canonical order.
pub fn build_cpt(
    rule: &Rule,
    cands: &[&Eid],
    now: Timestamp,
) -> Result<(Vec<EidState>, Cpt), SemanticsError> {
    let cards: Vec<usize> = cands.iter().map(|e| e.domain().len()).collect();
    let mut outcomes = Vec::with_capacity(assign::product(&cards));
    let mut odo = Odometer::new(&cards);
    while let Some(assignment) = odo.next() {
        let h = history_for(cands, assignment)?;
        outcomes.push(match rule_world_outcome(rule, &h, now)? {
            RuleOutcome::Triggered { inferred, prob } => Some((EidState::Occurred(inferred), prob)),
            RuleOutcome::NotTriggered => None,
        });
    }

    let mut occurred: Vec<EidState> = outcomes.iter().flatten().map(|(s, _)| s.clone()).collect();
    occurred.sort();
    occurred.dedup();
    let mut domain = Vec::with_capacity(occurred.len() + 1);
    domain.push(EidState::NotOccurred);
    domain.extend(occurred);

    let rows = outcomes
        .into_iter()
        .map(|outcome| {
            let mut row = vec![0.0; domain.len()];
            match outcome {
                Some((state, prob)) => {
                    let at = domain
                        .iter()
                        .position(|s| *s == state)
                        .expect("state collected above");
                    row[at] = prob;
                    row[0] = 1.0 - prob;
                }
                None => row[0] = 1.0,
            }
            row
        })
        .collect();
    Ok((
        domain,
        Cpt {
            parent_cards: cards,
            rows,
        },
    ))
}
