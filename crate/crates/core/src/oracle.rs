//! Possible-worlds enumeration: the reference semantics the Bayesian network
//! is checked against.
//!
//! Every combination of explicit states is a world. Rules are then applied
//! one at a time, each triggered world splitting into an occurred and a
//! not-occurred branch, so inferred events are visible to later rules.
//! Marginals are sums of world masses.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::distribution::Distribution;
use crate::event::{Eid, EidState, Origin, Timestamp, PROB_TOLERANCE};
use crate::network::{inferred_eid_id, BayesNetwork, NetworkError};
use crate::rules::{dependency_order, RuleSet};
use crate::semantics::{
    rule_world_outcome, ConcreteHistory, HistoryEntry, RuleOutcome, SemanticsError,
};

/// Largest world count enumerated by default.
pub const DEFAULT_WORLD_CAP: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance needs more than {cap} worlds; use the engine instead")]
    TooManyWorlds { cap: usize },
    #[error("EID {id}: state {state} is possible but missing from the network's domain")]
    DomainMismatch { id: String, state: String },
    #[error("no EID with id {0}")]
    UnknownId(String),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub assignment: BTreeMap<String, EidState>,
    pub mass: f64,
}

impl World {
    fn history(
        &self,
        origins: &BTreeMap<String, Origin>,
    ) -> Result<ConcreteHistory, SemanticsError> {
        let entries = self
            .assignment
            .iter()
            .filter_map(|(id, state)| {
                state.instance().map(|inst| HistoryEntry {
                    origin: origins[id],
                    instance: inst.clone(),
                })
            })
            .collect();
        ConcreteHistory::new(entries)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldSet {
    pub worlds: Vec<World>,
    /// Total mass after the explicit stage and after each rule.
    pub stage_masses: Vec<f64>,
    /// Inference time used for every inferred instance.
    pub now: Timestamp,
}

impl WorldSet {
    pub fn total_mass(&self) -> f64 {
        self.worlds.iter().map(|w| w.mass).sum()
    }
}

/// Enumerates every possible world of the explicit EIDs under the rules.
/// Worlds of zero mass are kept so that every reachable state shows up.
pub fn enumerate_worlds(
    explicit: &[Eid],
    rules: &RuleSet,
    cap: usize,
) -> Result<WorldSet, OracleError> {
    let too_many = OracleError::TooManyWorlds { cap };
    let count = explicit
        .iter()
        .try_fold(1usize, |acc, e| acc.checked_mul(e.domain().len()))
        .filter(|&n| n <= cap)
        .ok_or_else(|| too_many.clone())?;

    let now = explicit.iter().filter_map(Eid::occ_t).max().unwrap_or(0);
    let mut origins: BTreeMap<String, Origin> = explicit
        .iter()
        .map(|e| (e.id().to_string(), Origin::Explicit))
        .collect();

    let mut worlds = Vec::with_capacity(count);
    worlds.push(World {
        assignment: BTreeMap::new(),
        mass: 1.0,
    });
    for eid in explicit {
        let prior = eid
            .prior()
            .ok_or_else(|| NetworkError::NotExplicit(eid.id().into()))?;
        worlds = worlds
            .into_iter()
            .flat_map(|w| {
                eid.domain().iter().zip(prior).map(move |(state, p)| {
                    let mut assignment = w.assignment.clone();
                    assignment.insert(eid.id().to_string(), state.clone());
                    World {
                        assignment,
                        mass: w.mass * p,
                    }
                })
            })
            .collect();
    }
    let mut stage_masses = vec![worlds.iter().map(|w| w.mass).sum()];

    for (i, rule) in dependency_order(rules).into_iter().enumerate() {
        let id = inferred_eid_id(&rule.id);
        origins.insert(id.clone(), Origin::Inferred);
        let mut next = Vec::with_capacity(worlds.len());
        for world in worlds {
            let h = world.history(&origins)?;
            match rule_world_outcome(rule, &h, now)? {
                RuleOutcome::Triggered { inferred, prob } => {
                    if next.len() + 2 > cap {
                        return Err(too_many);
                    }
                    let mut occurred = world.clone();
                    occurred
                        .assignment
                        .insert(id.clone(), EidState::Occurred(inferred.with_seq(i as u64)));
                    occurred.mass *= prob;
                    let mut missed = world;
                    missed.assignment.insert(id.clone(), EidState::NotOccurred);
                    missed.mass *= 1.0 - prob;
                    next.push(occurred);
                    next.push(missed);
                }
                RuleOutcome::NotTriggered => {
                    let mut w = world;
                    w.assignment.insert(id.clone(), EidState::NotOccurred);
                    next.push(w);
                }
            }
        }
        worlds = next;
        stage_masses.push(worlds.iter().map(|w| w.mass).sum());
    }

    Ok(WorldSet {
        worlds,
        stage_masses,
        now,
    })
}

/// Marginal of one EID: `NotOccurred` first, then occurred states in
/// canonical order.
pub fn oracle_marginal(ws: &WorldSet, id: &str) -> Result<Distribution, OracleError> {
    let mut masses: BTreeMap<EidState, f64> = BTreeMap::new();
    let mut seen = false;
    for world in &ws.worlds {
        let state = match world.assignment.get(id) {
            Some(s) => {
                seen = true;
                s.clone()
            }
            None => EidState::NotOccurred,
        };
        *masses.entry(state).or_default() += world.mass;
    }
    if !seen {
        return Err(OracleError::UnknownId(id.into()));
    }
    // BTreeMap order already puts NotOccurred first.
    Ok(Distribution::new(masses.into_iter().collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonEntry {
    pub id: String,
    pub max_abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub entries: Vec<ComparisonEntry>,
    pub tolerance: f64,
    pub pass: bool,
}

impl Comparison {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("comparison serializes");
        s.push('\n');
        s
    }

    /// Ids whose difference exceeds the tolerance.
    pub fn failures(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.max_abs_diff.is_nan() || e.max_abs_diff > self.tolerance)
            .map(|e| e.id.as_str())
            .collect()
    }
}

/// Compares every EID of the world set against the network's marginals.
/// An inferred EID the network never created counts as certainly not
/// occurring.
pub fn compare_network(
    ws: &WorldSet,
    net: &BayesNetwork,
    tol: f64,
) -> Result<Comparison, OracleError> {
    let ids: BTreeSet<&String> = ws.worlds.iter().flat_map(|w| w.assignment.keys()).collect();
    let mut entries = Vec::with_capacity(ids.len());
    for id in ids {
        let expected = oracle_marginal(ws, id)?;
        let actual = match net.node(id) {
            Some(node) => {
                for (state, _) in expected.entries() {
                    if node.eid().state_index(state).is_none() {
                        return Err(OracleError::DomainMismatch {
                            id: id.clone(),
                            state: state.label(),
                        });
                    }
                }
                net.marginal(id)?
            }
            None => {
                if let Some((state, _)) = expected.entries().iter().find(|(s, _)| s.is_occurred()) {
                    return Err(OracleError::DomainMismatch {
                        id: id.clone(),
                        state: state.label(),
                    });
                }
                Distribution::never()
            }
        };
        entries.push(ComparisonEntry {
            id: id.clone(),
            max_abs_diff: expected.max_abs_diff(&actual),
        });
    }
    let pass = entries.iter().all(|e| e.max_abs_diff <= tol);
    Ok(Comparison {
        entries,
        tolerance: tol,
        pass,
    })
}

/// Builds the network from the explicit EIDs, fed in history order, and
/// compares it with the enumerated worlds.
pub fn compare_with_network(
    explicit: &[Eid],
    rules: &RuleSet,
    tol: f64,
    cap: usize,
) -> Result<Comparison, OracleError> {
    let ws = enumerate_worlds(explicit, rules, cap)?;
    let mut ordered: Vec<&Eid> = explicit.iter().collect();
    ordered.sort_by_key(|e| e.history_key());
    let mut net = BayesNetwork::new();
    for eid in ordered {
        net.on_event_arrival(eid.clone(), rules)?;
    }
    compare_network(&ws, &net, tol)
}

/// Whether every stage conserved total mass.
pub fn mass_conserved(ws: &WorldSet) -> bool {
    ws.stage_masses
        .iter()
        .all(|m| (m - 1.0).abs() <= PROB_TOLERANCE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{AttrValue, EventInstance};
    use crate::rules::parse_rules;

    const RULES: &str = "
explicit type StockSell { stockTicker: string, customerID: string }
explicit type StockPurchase { stockTicker: string, customerID: string }
explicit type Audit { customerID: string }
type IllegalStockTrading { stockTicker: string, customerID: string }
type Flagged { customerID: string }

rule IllegalTrade priority 10 prob 0.7 {
  select e1: StockSell, e2: StockPurchase;
  where e1.occT <= e2.occT <= e1.occT + 5
    and e1.stockTicker == e2.stockTicker
    and e1.customerID == e2.customerID;
  emit IllegalStockTrading { stockTicker = e1.stockTicker, customerID = e1.customerID };
}

rule Escalate priority 20 prob 0.5 {
  select t: IllegalStockTrading, a: Audit;
  where t.customerID == a.customerID;
  emit Flagged { customerID = a.customerID };
}
";

    fn trade(seq: u64, ty: &str, t: Timestamp, p: f64) -> Eid {
        let inst = EventInstance::new(
            ty,
            t,
            [
                ("stockTicker".to_string(), AttrValue::Str("IBM".into())),
                ("customerID".to_string(), AttrValue::Str("C1".into())),
            ],
        );
        Eid::explicit(
            format!("E{seq}"),
            ty,
            seq,
            vec![
                (EidState::NotOccurred, 1.0 - p),
                (EidState::Occurred(inst), p),
            ],
        )
        .unwrap()
    }

    fn audit(seq: u64, t: Timestamp, p: f64) -> Eid {
        let inst = EventInstance::new(
            "Audit",
            t,
            [("customerID".to_string(), AttrValue::Str("C1".into()))],
        );
        Eid::explicit(
            format!("E{seq}"),
            "Audit",
            seq,
            vec![(EidState::Occurred(inst), p)],
        )
        .unwrap()
    }

    fn scenario() -> Vec<Eid> {
        vec![
            trade(1, "StockSell", 5, 0.6),
            trade(2, "StockSell", 9, 1.0),
            trade(3, "StockPurchase", 12, 1.0),
        ]
    }

    #[test]
    fn bernoulli_event() {
        let rs = parse_rules(RULES).unwrap();
        let ws =
            enumerate_worlds(&[trade(1, "StockSell", 5, 0.6)], &rs, DEFAULT_WORLD_CAP).unwrap();
        assert_eq!(ws.worlds.len(), 2);
        let m = oracle_marginal(&ws, "E1").unwrap();
        assert_eq!(m.occurred(), 0.6);
        assert_eq!(m.not_occurred(), 0.4);
        assert!(mass_conserved(&ws));
    }

    #[test]
    fn reference_scenario() {
        let rs = parse_rules(RULES).unwrap();
        let ws = enumerate_worlds(&scenario(), &rs, DEFAULT_WORLD_CAP).unwrap();
        // Only E1 absent with E2 and E3 present triggers the rule.
        let triggered = ws
            .worlds
            .iter()
            .filter(|w| w.assignment["E_IllegalTrade"].is_occurred())
            .collect::<Vec<_>>();
        assert_eq!(triggered.len(), 1);
        assert_eq!(ws.worlds.len(), 9);
        let m = oracle_marginal(&ws, "E_IllegalTrade").unwrap();
        assert!((m.occurred() - 0.28).abs() < 1e-12);
        assert!(m.is_normalized());
        let positive: Vec<_> = ws.worlds.iter().filter(|w| w.mass > 0.0).collect();
        assert_eq!(positive.len(), 3);
        assert!(mass_conserved(&ws));
    }

    #[test]
    fn no_world_skips_a_certain_event() {
        let rs = parse_rules(RULES).unwrap();
        let ws = enumerate_worlds(&scenario(), &rs, DEFAULT_WORLD_CAP).unwrap();
        for w in ws.worlds.iter().filter(|w| w.mass > 0.0) {
            assert!(w.assignment["E2"].is_occurred());
            assert!(w.assignment["E3"].is_occurred());
        }
    }

    #[test]
    fn agrees_with_network() {
        let rs = parse_rules(RULES).unwrap();
        let mut explicit = scenario();
        explicit.push(audit(4, 14, 0.8));
        let cmp = compare_with_network(&explicit, &rs, 1e-9, DEFAULT_WORLD_CAP).unwrap();
        assert!(cmp.pass, "{cmp:?}");
        assert_eq!(cmp.entries.len(), 6);
    }

    #[test]
    fn corrupted_row_is_reported() {
        let rs = parse_rules(RULES).unwrap();
        let explicit = scenario();
        let ws = enumerate_worlds(&explicit, &rs, DEFAULT_WORLD_CAP).unwrap();
        let mut net = BayesNetwork::new();
        for e in &explicit {
            net.on_event_arrival(e.clone(), &rs).unwrap();
        }
        net.override_cpt_row("E_IllegalTrade", 3, vec![0.5, 0.5])
            .unwrap();
        let cmp = compare_network(&ws, &net, 1e-9).unwrap();
        assert!(!cmp.pass);
        assert_eq!(cmp.failures(), ["E_IllegalTrade"]);
    }

    #[test]
    fn refuses_large_instances() {
        let rs = parse_rules(RULES).unwrap();
        let explicit: Vec<Eid> = (1..=21).map(|i| trade(i, "StockSell", i, 0.5)).collect();
        assert_eq!(
            enumerate_worlds(&explicit, &rs, DEFAULT_WORLD_CAP),
            Err(OracleError::TooManyWorlds {
                cap: DEFAULT_WORLD_CAP
            })
        );
        assert!(enumerate_worlds(&explicit[..3], &RuleSet::default(), 8).is_ok());
        assert!(enumerate_worlds(&explicit[..4], &RuleSet::default(), 8).is_err());
    }

    #[test]
    fn unknown_id() {
        let ws = enumerate_worlds(&scenario(), &parse_rules(RULES).unwrap(), 64).unwrap();
        assert_eq!(
            oracle_marginal(&ws, "E9"),
            Err(OracleError::UnknownId("E9".into()))
        );
    }

    /// Within each group of worlds sharing the parents' states (and every
    /// other upstream state), the child's conditional distribution is the same.
    #[test]
    fn conditional_depends_only_on_parents() {
        let rs = parse_rules(RULES).unwrap();
        let mut explicit = scenario();
        explicit.push(audit(4, 14, 0.8));
        let ws = enumerate_worlds(&explicit, &rs, DEFAULT_WORLD_CAP).unwrap();
        let child = "E_IllegalTrade";
        let parents = ["E1", "E2", "E3"];
        let others = ["E4"];

        type Key = (Vec<EidState>, Vec<EidState>);
        let mut groups: BTreeMap<Key, BTreeMap<EidState, f64>> = BTreeMap::new();
        for w in &ws.worlds {
            let key = (
                parents.iter().map(|p| w.assignment[*p].clone()).collect(),
                others.iter().map(|p| w.assignment[*p].clone()).collect(),
            );
            *groups
                .entry(key)
                .or_default()
                .entry(w.assignment[child].clone())
                .or_default() += w.mass;
        }
        let mut by_parents: BTreeMap<Vec<EidState>, Vec<Vec<f64>>> = BTreeMap::new();
        for ((pa, _), dist) in groups {
            let total: f64 = dist.values().sum();
            if total == 0.0 {
                continue;
            }
            let states: BTreeSet<EidState> = ws
                .worlds
                .iter()
                .map(|w| w.assignment[child].clone())
                .collect();
            let cond = states
                .iter()
                .map(|s| dist.get(s).copied().unwrap_or(0.0) / total)
                .collect();
            by_parents.entry(pa).or_default().push(cond);
        }
        assert!(!by_parents.is_empty());
        for conds in by_parents.values() {
            for c in conds {
                for (a, b) in c.iter().zip(&conds[0]) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}
