//! Library facade: rule loading, event ingestion, queries and reports.
//!
//! Event files are JSON Lines. A record either reports one alternative with
//! its occurrence probability,
//!
//! ```text
//! {"seq":1,"type":"StockSell","occT":5,"prob":0.6,"attrs":{"stockTicker":"IBM","customerID":"C1"}}
//! ```
//!
//! or several alternatives whose residual mass means "did not occur":
//!
//! ```text
//! {"seq":2,"type":"StockQuote","occT":"10:34","alternatives":[{"prob":0.3,"attrs":{"price":105}},{"prob":0.4,"attrs":{"price":100}}]}
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::distribution::Distribution;
use crate::event::{
    parse_timestamp, AttrKind, AttrValue, Eid, EidState, EventInstance, ModelError, Timestamp,
};
use crate::network::{ArrivalOutcome, BayesNetwork, NetworkError};
use crate::oracle::{compare_with_network, Comparison, OracleError};
use crate::rules::{parse_rules, validate_ruleset, ParseError, RuleSet, ValidationError};

pub const ENGINE_NAME: &str = "pcep";
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("{}", join_lines(.0))]
    Parse(Vec<ParseError>),
    #[error("{}", join_lines(.0))]
    Validation(Vec<ValidationError>),
    #[error("events line {line}: {message}")]
    Input { line: usize, message: String },
    #[error("{0}")]
    Io(String),
    #[error("inadmissible event: {0}")]
    Admissibility(String),
    #[error(transparent)]
    OracleCap(OracleError),
    #[error("internal error: {0}")]
    Internal(String),
}

fn join_lines<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

impl EngineError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            EngineError::Parse(_)
            | EngineError::Validation(_)
            | EngineError::Input { .. }
            | EngineError::Io(_) => 2,
            EngineError::Admissibility(_) => 3,
            EngineError::OracleCap(_) => 4,
            EngineError::Internal(_) => 70,
        }
    }
}

impl From<NetworkError> for EngineError {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::Model(ModelError::MultipleOccurrenceTimes { .. }) => {
                EngineError::Admissibility(e.to_string())
            }
            NetworkError::DuplicateId(_)
            | NetworkError::DuplicateKey { .. }
            | NetworkError::NotExplicit(_) => EngineError::Input {
                line: 0,
                message: e.to_string(),
            },
            other => EngineError::Internal(other.to_string()),
        }
    }
}

impl From<OracleError> for EngineError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::TooManyWorlds { .. } => EngineError::OracleCap(e),
            OracleError::Network(n) => n.into(),
            other => EngineError::Internal(other.to_string()),
        }
    }
}

/// Parses and validates a rule file.
pub fn load_rules(src: &str) -> Result<RuleSet, EngineError> {
    let rules = parse_rules(src).map_err(EngineError::Parse)?;
    validate_ruleset(&rules).map_err(EngineError::Validation)?;
    Ok(rules)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawTime {
    Ticks(u64),
    Clock(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlternative {
    prob: f64,
    #[serde(default)]
    attrs: serde_json::Map<String, Value>,
    #[serde(rename = "occT")]
    occ_t: Option<RawTime>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    seq: Option<u64>,
    #[serde(rename = "type")]
    type_name: String,
    #[serde(rename = "occT")]
    occ_t: Option<RawTime>,
    prob: Option<f64>,
    attrs: Option<serde_json::Map<String, Value>>,
    alternatives: Option<Vec<RawAlternative>>,
}

fn time_of(raw: &RawTime) -> Result<Timestamp, ModelError> {
    match raw {
        RawTime::Ticks(t) => Ok(*t),
        RawTime::Clock(s) => parse_timestamp(s),
    }
}

fn coerce(kind: AttrKind, value: &Value) -> Option<AttrValue> {
    match (kind, value) {
        (AttrKind::Str, Value::String(s)) => Some(AttrValue::Str(s.clone())),
        (AttrKind::Int, Value::Number(n)) => n.as_i64().map(AttrValue::Int),
        (AttrKind::Decimal, Value::Number(n)) => {
            let text = n.to_string();
            Decimal::from_str(&text)
                .or_else(|_| Decimal::from_scientific(&text))
                .ok()
                .map(|d| AttrValue::Decimal(d.normalize()))
        }
        _ => None,
    }
}

/// Parses a JSON Lines event file into explicit EIDs, in file order.
///
/// `seq` defaults to the line number. Events of types emitted by a rule are
/// refused: those are only ever inferred.
pub fn parse_events(src: &str, rules: &RuleSet) -> Result<Vec<Eid>, EngineError> {
    let mut eids = Vec::new();
    let mut seqs = BTreeSet::new();
    for (idx, text) in src.lines().enumerate() {
        let line = idx + 1;
        if text.trim().is_empty() {
            continue;
        }
        let err = |message: String| EngineError::Input { line, message };
        let raw: RawRecord = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
        let seq = raw.seq.unwrap_or(line as u64);
        if !seqs.insert(seq) {
            return Err(err(format!("seq {seq} used twice")));
        }
        let schema = rules
            .schemas
            .get(&raw.type_name)
            .ok_or_else(|| err(format!("unknown event type {}", raw.type_name)))?;
        if rules.is_inferred_type(&raw.type_name) {
            return Err(err(format!(
                "event type {} is inferred by a rule and cannot be reported",
                raw.type_name
            )));
        }
        let record_t = raw
            .occ_t
            .as_ref()
            .map(time_of)
            .transpose()
            .map_err(|e| err(e.to_string()))?;

        let instance = |attrs: &serde_json::Map<String, Value>, t: Option<&RawTime>| {
            let occ_t = match t {
                Some(t) => time_of(t).map_err(|e| err(e.to_string()))?,
                None => record_t.ok_or_else(|| err("missing occT".into()))?,
            };
            let mut values = Vec::with_capacity(attrs.len());
            for (name, value) in attrs {
                let kind = schema
                    .kind_of(name)
                    .ok_or_else(|| err(format!("{} has no attribute {name}", raw.type_name)))?;
                let v = coerce(kind, value).ok_or_else(|| {
                    err(format!("attribute {name}: expected {kind}, got {value}"))
                })?;
                values.push((name.clone(), v));
            }
            let inst = EventInstance::new(raw.type_name.clone(), occ_t, values);
            schema.check(&inst).map_err(|e| err(e.to_string()))?;
            Ok::<_, EngineError>(inst)
        };

        let states = match (raw.prob, &raw.attrs, &raw.alternatives) {
            (Some(p), attrs, None) => {
                let inst = instance(&attrs.clone().unwrap_or_default(), None)?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(err(format!("probability {p} outside [0, 1]")));
                }
                // A single reported probability always yields a two-state EID.
                vec![
                    (EidState::NotOccurred, 1.0 - p),
                    (EidState::Occurred(inst), p),
                ]
            }
            (None, None, Some(alts)) => alts
                .iter()
                .map(|a| {
                    Ok((
                        EidState::Occurred(instance(&a.attrs, a.occ_t.as_ref())?),
                        a.prob,
                    ))
                })
                .collect::<Result<Vec<_>, EngineError>>()?,
            _ => {
                return Err(err(
                    "a record needs either prob and attrs, or alternatives".into()
                ))
            }
        };
        let eid = Eid::explicit(format!("E{seq}"), raw.type_name.clone(), seq, states)
            .map_err(|e| err(e.to_string()))?;
        eids.push(eid);
    }
    Ok(eids)
}

/// Which EIDs a report covers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Query {
    /// Only inferred EIDs.
    #[default]
    Inferred,
    All,
    /// EIDs of the listed types, explicit or inferred.
    Types(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportEntry {
    pub id: String,
    #[serde(rename = "type")]
    pub type_name: String,
    #[serde(rename = "occT")]
    pub occ_t: Option<Timestamp>,
    pub marginal: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NetworkStats {
    pub nodes: usize,
    pub edges: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EngineInfo {
    pub name: String,
    pub version: String,
}

/// SHA-256 digests of the rule source and of the canonical event set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigests {
    pub rules: String,
    pub events: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub eids: Vec<ReportEntry>,
    pub network: NetworkStats,
    pub engine: EngineInfo,
    pub inputs: InputDigests,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        let id_w = self
            .eids
            .iter()
            .map(|e| e.id.len())
            .chain([2])
            .max()
            .unwrap();
        let ty_w = self
            .eids
            .iter()
            .map(|e| e.type_name.len())
            .chain([4])
            .max()
            .unwrap();
        let p_w = self
            .eids
            .iter()
            .flat_map(|e| e.marginal.values().map(|p| p.to_string().len()))
            .chain([11])
            .max()
            .unwrap();
        let mut out = String::new();
        writeln!(
            out,
            "{:id_w$}  {:ty_w$}  {:>6}  {:p_w$}  state",
            "id", "type", "occT", "probability"
        )
        .unwrap();
        for e in &self.eids {
            let occ = e.occ_t.map_or_else(|| "-".into(), |t| t.to_string());
            for (i, (label, p)) in e.marginal.iter().enumerate() {
                let (id, ty, occ) = if i == 0 {
                    (e.id.as_str(), e.type_name.as_str(), occ.as_str())
                } else {
                    ("", "", "")
                };
                writeln!(
                    out,
                    "{id:id_w$}  {ty:ty_w$}  {occ:>6}  {:p_w$}  {label}",
                    p.to_string()
                )
                .unwrap();
            }
        }
        writeln!(
            out,
            "network: {} nodes, {} edges",
            self.network.nodes, self.network.edges
        )
        .unwrap();
        out
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of the events independent of their order in the input.
fn events_digest(eids: &[Eid]) -> String {
    let mut sorted: Vec<&Eid> = eids.iter().collect();
    sorted.sort_by_key(|e| e.history_key());
    let mut text = String::new();
    for eid in sorted {
        write!(text, "{} {}", eid.id(), eid.type_name()).unwrap();
        for (state, p) in eid.domain().iter().zip(eid.prior().unwrap_or_default()) {
            write!(text, " {}={p:?}", state.label()).unwrap();
        }
        text.push('\n');
    }
    sha256_hex(text.as_bytes())
}

/// A validated rule set plus the network built from the events so far.
#[derive(Debug, Clone)]
pub struct Engine {
    rules: RuleSet,
    network: BayesNetwork,
}

impl Engine {
    pub fn new(rules: RuleSet) -> Result<Self, EngineError> {
        validate_ruleset(&rules).map_err(EngineError::Validation)?;
        Ok(Engine {
            rules,
            network: BayesNetwork::new(),
        })
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn network(&self) -> &BayesNetwork {
        &self.network
    }

    /// Adds one explicit EID and updates the inferred nodes.
    pub fn ingest(&mut self, eid: Eid) -> Result<ArrivalOutcome, EngineError> {
        if self.rules.is_inferred_type(eid.type_name()) {
            return Err(EngineError::Input {
                line: 0,
                message: format!("event type {} is inferred by a rule", eid.type_name()),
            });
        }
        eid.validate_single_occt()
            .map_err(|e| EngineError::Admissibility(e.to_string()))?;
        Ok(self.network.on_event_arrival(eid, &self.rules)?)
    }

    /// Sorts the EIDs into history order, then ingests them one by one.
    pub fn ingest_all(&mut self, mut eids: Vec<Eid>) -> Result<(), EngineError> {
        if let Some(bad) = eids.iter().find(|e| e.validate_single_occt().is_err()) {
            return Err(EngineError::Admissibility(
                bad.validate_single_occt().unwrap_err().to_string(),
            ));
        }
        eids.sort_by_key(Eid::history_key);
        for eid in eids {
            self.ingest(eid)?;
        }
        Ok(())
    }

    pub fn marginal(&self, id: &str) -> Result<Distribution, EngineError> {
        self.network.marginal(id).map_err(|e| match e {
            NetworkError::UnknownId(_) => EngineError::Input {
                line: 0,
                message: e.to_string(),
            },
            other => other.into(),
        })
    }

    pub fn report(&self, query: &Query, digests: InputDigests) -> Result<Report, EngineError> {
        if let Query::Types(types) = query {
            if let Some(t) = types.iter().find(|t| self.rules.schemas.get(t).is_none()) {
                return Err(EngineError::Input {
                    line: 0,
                    message: format!("unknown event type {t} in query"),
                });
            }
        }
        self.network
            .check_invariants()
            .map_err(EngineError::Internal)?;
        let mut eids = Vec::new();
        for node in self.network.nodes() {
            let eid = node.eid();
            let wanted = match query {
                Query::Inferred => eid.prior().is_none(),
                Query::All => true,
                Query::Types(types) => types.iter().any(|t| t == eid.type_name()),
            };
            if !wanted {
                continue;
            }
            let dist = self.marginal(eid.id())?;
            if !dist.is_normalized() {
                return Err(EngineError::Internal(format!(
                    "marginal of {} sums to {}",
                    eid.id(),
                    dist.total()
                )));
            }
            eids.push(ReportEntry {
                id: eid.id().to_string(),
                type_name: eid.type_name().to_string(),
                occ_t: eid.occ_t(),
                marginal: dist
                    .entries()
                    .iter()
                    .map(|(s, p)| (s.label(), *p))
                    .collect(),
            });
        }
        Ok(Report {
            eids,
            network: NetworkStats {
                nodes: self.network.len(),
                edges: self.network.edge_count(),
            },
            engine: EngineInfo {
                name: ENGINE_NAME.into(),
                version: ENGINE_VERSION.into(),
            },
            inputs: digests,
        })
    }
}

fn build(rules_src: &str, events_src: &str) -> Result<(Engine, Vec<Eid>), EngineError> {
    let rules = load_rules(rules_src)?;
    let eids = parse_events(events_src, &rules)?;
    let mut engine = Engine::new(rules)?;
    engine.ingest_all(eids.clone())?;
    Ok((engine, eids))
}

/// Builds the network from both files and reports the queried marginals.
pub fn run_batch(rules_src: &str, events_src: &str, query: &Query) -> Result<Report, EngineError> {
    let (engine, eids) = build(rules_src, events_src)?;
    engine.report(
        query,
        InputDigests {
            rules: sha256_hex(rules_src.as_bytes()),
            events: events_digest(&eids),
        },
    )
}

/// Parses and validates a rule file.
pub fn run_check(rules_src: &str) -> Result<RuleSet, EngineError> {
    load_rules(rules_src)
}

/// Compares the network with the possible-worlds enumeration.
pub fn run_oracle_diff(
    rules_src: &str,
    events_src: &str,
    tol: f64,
    cap: usize,
) -> Result<Comparison, EngineError> {
    let rules = load_rules(rules_src)?;
    let eids = parse_events(events_src, &rules)?;
    if let Some(bad) = eids.iter().find(|e| e.validate_single_occt().is_err()) {
        return Err(EngineError::Admissibility(
            bad.validate_single_occt().unwrap_err().to_string(),
        ));
    }
    Ok(compare_with_network(&eids, &rules, tol, cap)?)
}

/// Graphviz text of the final network.
pub fn run_export(rules_src: &str, events_src: &str) -> Result<String, EngineError> {
    Ok(build(rules_src, events_src)?.0.network().export_dot())
}
