//! Event schemas, concrete event instances and EID random variables.
//!
//! An [`Eid`] is the engine's knowledge about a single event: a finite-domain
//! random variable whose states are either `NotOccurred` or a concrete
//! [`EventInstance`]. Explicit EIDs carry a prior; inferred EIDs are produced
//! by exactly one rule and get their distribution from the network.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};

use rust_decimal::Decimal;
use thiserror::Error;

/// Occurrence time in integer ticks. The unit is scenario-defined.
pub type Timestamp = u64;

/// Tolerance used for every probability-normalization check.
pub const PROB_TOLERANCE: f64 = 1e-9;

/// Name of the attribute every event carries implicitly.
pub const OCC_T: &str = "occT";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("EID {id}: no states given")]
    EmptyDistribution { id: String },
    #[error("EID {id}: probability {p} outside [0, 1]")]
    ProbabilityOutOfRange { id: String, p: f64 },
    #[error("EID {id}: probabilities sum to {sum}, more than 1")]
    ProbabilitySumExceedsOne { id: String, sum: f64 },
    #[error("EID {id}: distribution sums to {sum}, expected 1")]
    NotNormalized { id: String, sum: f64 },
    #[error("EID {id}: duplicate state {state}")]
    DuplicateState { id: String, state: String },
    #[error("EID {id}: state of type {found} in an EID of type {expected}")]
    MixedTypes {
        id: String,
        expected: String,
        found: String,
    },
    #[error("EID {id}: state {state} is not in the domain")]
    StateNotInDomain { id: String, state: String },
    #[error("EID {id} is not explicit")]
    NotExplicit { id: String },
    #[error("EID {id} has several possible occurrence times {times:?}; inference requires a single occurrence time")]
    MultipleOccurrenceTimes { id: String, times: Vec<Timestamp> },
    #[error("invalid window [{t1}, {t2}]")]
    InvalidWindow { t1: Timestamp, t2: Timestamp },
    #[error("type {type_name}: duplicate attribute {attr}")]
    DuplicateAttribute { type_name: String, attr: String },
    #[error("type {type_name}: attribute occT is implicit and may not be declared")]
    ReservedAttribute { type_name: String },
    #[error("event type {0} declared twice")]
    DuplicateType(String),
    #[error("unknown event type {0}")]
    UnknownType(String),
    #[error("instance of {type_name} does not match its schema: {detail}")]
    SchemaMismatch { type_name: String, detail: String },
    #[error("cannot compare a {left} value with a {right} value")]
    KindMismatch { left: AttrKind, right: AttrKind },
    #[error("invalid timestamp {0:?}; expected ticks or HH:MM")]
    InvalidTimestamp(String),
    #[error("two EIDs share the history key {0:?}")]
    DuplicateHistoryKey(HistoryKey),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttrKind {
    Str,
    Int,
    Decimal,
}

impl AttrKind {
    pub fn keyword(self) -> &'static str {
        match self {
            AttrKind::Str => "string",
            AttrKind::Int => "int",
            AttrKind::Decimal => "decimal",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "string" => Some(AttrKind::Str),
            "int" => Some(AttrKind::Int),
            "decimal" => Some(AttrKind::Decimal),
            _ => None,
        }
    }
}

impl fmt::Display for AttrKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// A single attribute value. Decimals are exact.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttrValue {
    Str(String),
    Int(i64),
    Decimal(Decimal),
}

impl AttrValue {
    pub fn kind(&self) -> AttrKind {
        match self {
            AttrValue::Str(_) => AttrKind::Str,
            AttrValue::Int(_) => AttrKind::Int,
            AttrValue::Decimal(_) => AttrKind::Decimal,
        }
    }

    /// Equality that refuses to compare values of different kinds.
    pub fn try_eq(&self, other: &AttrValue) -> Result<bool, ModelError> {
        if self.kind() != other.kind() {
            return Err(ModelError::KindMismatch {
                left: self.kind(),
                right: other.kind(),
            });
        }
        Ok(self == other)
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Str(s) => write!(f, "{s:?}"),
            AttrValue::Int(i) => write!(f, "{i}"),
            AttrValue::Decimal(d) => write!(f, "{d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSchema {
    pub type_name: String,
    pub attributes: Vec<(String, AttrKind)>,
    /// Declared as signalled by an external source; no rule may emit it.
    pub explicit: bool,
}

impl EventSchema {
    pub fn new(
        type_name: impl Into<String>,
        attributes: Vec<(String, AttrKind)>,
        explicit: bool,
    ) -> Result<Self, ModelError> {
        let type_name = type_name.into();
        let mut seen = BTreeSet::new();
        for (name, _) in &attributes {
            if name == OCC_T {
                return Err(ModelError::ReservedAttribute { type_name });
            }
            if !seen.insert(name.as_str()) {
                return Err(ModelError::DuplicateAttribute {
                    type_name,
                    attr: name.clone(),
                });
            }
        }
        Ok(EventSchema {
            type_name,
            attributes,
            explicit,
        })
    }

    pub fn kind_of(&self, attr: &str) -> Option<AttrKind> {
        self.attributes
            .iter()
            .find(|(name, _)| name == attr)
            .map(|(_, kind)| *kind)
    }

    /// Checks that `instance` has this type and exactly the declared attributes.
    pub fn check(&self, instance: &EventInstance) -> Result<(), ModelError> {
        let mismatch = |detail: String| ModelError::SchemaMismatch {
            type_name: self.type_name.clone(),
            detail,
        };
        if instance.type_name != self.type_name {
            return Err(mismatch(format!(
                "instance has type {}",
                instance.type_name
            )));
        }
        for (name, kind) in &self.attributes {
            match instance.attrs.get(name) {
                None => return Err(mismatch(format!("missing attribute {name}"))),
                Some(v) if v.kind() != *kind => {
                    return Err(mismatch(format!(
                        "attribute {name} is {}, expected {kind}",
                        v.kind()
                    )))
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = instance.attrs.keys().find(|k| self.kind_of(k).is_none()) {
            return Err(mismatch(format!("unknown attribute {extra}")));
        }
        Ok(())
    }
}

/// All declared event types, keyed by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SchemaRegistry {
    schemas: BTreeMap<String, EventSchema>,
}

impl SchemaRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, schema: EventSchema) -> Result<(), ModelError> {
        if self.schemas.contains_key(&schema.type_name) {
            return Err(ModelError::DuplicateType(schema.type_name));
        }
        self.schemas.insert(schema.type_name.clone(), schema);
        Ok(())
    }

    pub fn get(&self, type_name: &str) -> Option<&EventSchema> {
        self.schemas.get(type_name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &EventSchema> {
        self.schemas.values()
    }

    pub fn len(&self) -> usize {
        self.schemas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schemas.is_empty()
    }
}

/// One concrete occurrence of an event.
///
/// `seq` is the ingestion ordinal used to break ties between events with the
/// same occurrence time. It takes no part in equality, hashing or ordering.
#[derive(Debug, Clone)]
pub struct EventInstance {
    pub type_name: String,
    pub occ_t: Timestamp,
    pub attrs: BTreeMap<String, AttrValue>,
    pub seq: u64,
}

impl EventInstance {
    pub fn new(
        type_name: impl Into<String>,
        occ_t: Timestamp,
        attrs: impl IntoIterator<Item = (String, AttrValue)>,
    ) -> Self {
        EventInstance {
            type_name: type_name.into(),
            occ_t,
            attrs: attrs.into_iter().collect(),
            seq: 0,
        }
    }

    pub fn with_seq(mut self, seq: u64) -> Self {
        self.seq = seq;
        self
    }

    pub fn attr(&self, name: &str) -> Option<&AttrValue> {
        self.attrs.get(name)
    }

    fn identity(&self) -> (&str, Timestamp, &BTreeMap<String, AttrValue>) {
        (&self.type_name, self.occ_t, &self.attrs)
    }
}

impl PartialEq for EventInstance {
    fn eq(&self, other: &Self) -> bool {
        self.identity() == other.identity()
    }
}

impl Eq for EventInstance {}

impl Hash for EventInstance {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.identity().hash(state)
    }
}

impl PartialOrd for EventInstance {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EventInstance {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.identity().cmp(&other.identity())
    }
}

impl fmt::Display for EventInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[occT={}", self.type_name, self.occ_t)?;
        for (name, value) in &self.attrs {
            write!(f, ", {name}={value}")?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EidState {
    NotOccurred,
    Occurred(EventInstance),
}

impl EidState {
    pub fn instance(&self) -> Option<&EventInstance> {
        match self {
            EidState::NotOccurred => None,
            EidState::Occurred(inst) => Some(inst),
        }
    }

    pub fn is_occurred(&self) -> bool {
        matches!(self, EidState::Occurred(_))
    }

    /// Stable textual key, used in reports.
    pub fn label(&self) -> String {
        match self {
            EidState::NotOccurred => "notOccurred".to_string(),
            EidState::Occurred(inst) => {
                let mut s = format!("occurred[occT={}", inst.occ_t);
                for (name, value) in &inst.attrs {
                    s.push_str(&format!(", {name}={value}"));
                }
                s.push(']');
                s
            }
        }
    }
}

impl fmt::Display for EidState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EidState::NotOccurred => f.write_str("notOccurred"),
            EidState::Occurred(inst) => write!(f, "{inst}"),
        }
    }
}

/// Whether an EID was signalled from outside or deduced by a rule.
/// Explicit sorts before inferred at equal occurrence time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    Explicit,
    Inferred,
}

/// Total order key of an event history: (occT, explicit-before-inferred, seq).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HistoryKey {
    pub occ_t: Timestamp,
    pub origin: Origin,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EidKind {
    /// `prior[i]` is the probability of `domain[i]`.
    Explicit {
        prior: Vec<f64>,
    },
    Inferred {
        rule_id: String,
    },
}

/// Event Instance Data: a finite-domain random variable over the possible
/// states of one event.
#[derive(Debug, Clone, PartialEq)]
pub struct Eid {
    id: String,
    type_name: String,
    seq: u64,
    occ_t: Option<Timestamp>,
    domain: Vec<EidState>,
    kind: EidKind,
}

impl Eid {
    /// Builds an explicit EID from reported alternatives.
    ///
    /// When `NotOccurred` is not listed and the listed mass is below one, the
    /// residual is assigned to `NotOccurred`.
    pub fn explicit(
        id: impl Into<String>,
        type_name: impl Into<String>,
        seq: u64,
        states: Vec<(EidState, f64)>,
    ) -> Result<Eid, ModelError> {
        let id = id.into();
        let type_name = type_name.into();
        if states.is_empty() {
            return Err(ModelError::EmptyDistribution { id });
        }
        let mut domain = Vec::with_capacity(states.len() + 1);
        let mut prior = Vec::with_capacity(states.len() + 1);
        for (state, p) in states {
            if !(0.0..=1.0).contains(&p) {
                return Err(ModelError::ProbabilityOutOfRange { id, p });
            }
            let state = match state {
                EidState::Occurred(inst) => EidState::Occurred(inst.with_seq(seq)),
                s => s,
            };
            domain.push(state);
            prior.push(p);
        }
        check_domain(&id, &type_name, &domain)?;

        let sum: f64 = prior.iter().sum();
        if sum > 1.0 + PROB_TOLERANCE {
            return Err(ModelError::ProbabilitySumExceedsOne { id, sum });
        }
        let has_not_occurred = domain.contains(&EidState::NotOccurred);
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            if has_not_occurred {
                return Err(ModelError::NotNormalized { id, sum });
            }
            domain.insert(0, EidState::NotOccurred);
            prior.insert(0, 1.0 - sum);
        }
        let occ_t = domain
            .iter()
            .filter_map(|s| s.instance().map(|i| i.occ_t))
            .min();
        Ok(Eid {
            id,
            type_name,
            seq,
            occ_t,
            domain,
            kind: EidKind::Explicit { prior },
        })
    }

    /// An EID produced by a rule at inference time `occ_t`. Every occurred
    /// state must carry that time.
    pub fn inferred(
        id: impl Into<String>,
        type_name: impl Into<String>,
        seq: u64,
        occ_t: Timestamp,
        domain: Vec<EidState>,
        rule_id: impl Into<String>,
    ) -> Result<Eid, ModelError> {
        let id = id.into();
        let type_name = type_name.into();
        if domain.is_empty() {
            return Err(ModelError::EmptyDistribution { id });
        }
        check_domain(&id, &type_name, &domain)?;
        let mut times: BTreeSet<Timestamp> = domain
            .iter()
            .filter_map(|s| s.instance().map(|i| i.occ_t))
            .collect();
        times.insert(occ_t);
        if times.len() > 1 {
            return Err(ModelError::MultipleOccurrenceTimes {
                id,
                times: times.into_iter().collect(),
            });
        }
        let domain = domain
            .into_iter()
            .map(|s| match s {
                EidState::Occurred(inst) => EidState::Occurred(inst.with_seq(seq)),
                s => s,
            })
            .collect();
        Ok(Eid {
            id,
            type_name,
            seq,
            occ_t: Some(occ_t),
            domain,
            kind: EidKind::Inferred {
                rule_id: rule_id.into(),
            },
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn type_name(&self) -> &str {
        &self.type_name
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn domain(&self) -> &[EidState] {
        &self.domain
    }

    pub fn kind(&self) -> &EidKind {
        &self.kind
    }

    pub fn origin(&self) -> Origin {
        match self.kind {
            EidKind::Explicit { .. } => Origin::Explicit,
            EidKind::Inferred { .. } => Origin::Inferred,
        }
    }

    pub fn prior(&self) -> Option<&[f64]> {
        match &self.kind {
            EidKind::Explicit { prior } => Some(prior),
            EidKind::Inferred { .. } => None,
        }
    }

    pub fn state_index(&self, state: &EidState) -> Option<usize> {
        self.domain.iter().position(|s| s == state)
    }

    /// Distinct occurrence times over the occurred states, ascending.
    pub fn occ_times(&self) -> Vec<Timestamp> {
        self.domain
            .iter()
            .filter_map(|s| s.instance().map(|i| i.occ_t))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Earliest possible occurrence time of an explicit EID, or the
    /// inference time of an inferred one.
    pub fn occ_t(&self) -> Option<Timestamp> {
        self.occ_t
    }

    pub fn history_key(&self) -> HistoryKey {
        HistoryKey {
            occ_t: self.occ_t().unwrap_or(0),
            origin: self.origin(),
            seq: self.seq,
        }
    }

    /// Probability that the value of this EID falls in `subset`.
    pub fn prob_of_subset(&self, subset: &[EidState]) -> Result<f64, ModelError> {
        let prior = self.prior().ok_or_else(|| ModelError::NotExplicit {
            id: self.id.clone(),
        })?;
        let mut indices = BTreeSet::new();
        for state in subset {
            let idx = self
                .state_index(state)
                .ok_or_else(|| ModelError::StateNotInDomain {
                    id: self.id.clone(),
                    state: state.to_string(),
                })?;
            indices.insert(idx);
        }
        Ok(indices.into_iter().map(|i| prior[i]).sum())
    }

    /// Inference needs every event to have at most one possible occurrence time.
    pub fn validate_single_occt(&self) -> Result<(), ModelError> {
        let times = self.occ_times();
        if times.len() > 1 {
            return Err(ModelError::MultipleOccurrenceTimes {
                id: self.id.clone(),
                times,
            });
        }
        Ok(())
    }
}

fn check_domain(id: &str, type_name: &str, domain: &[EidState]) -> Result<(), ModelError> {
    let mut seen = BTreeSet::new();
    for state in domain {
        if let EidState::Occurred(inst) = state {
            if inst.type_name != type_name {
                return Err(ModelError::MixedTypes {
                    id: id.to_string(),
                    expected: type_name.to_string(),
                    found: inst.type_name.clone(),
                });
            }
        }
        if !seen.insert(state) {
            return Err(ModelError::DuplicateState {
                id: id.to_string(),
                state: state.to_string(),
            });
        }
    }
    Ok(())
}

/// A set of EIDs in history order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventHistory {
    eids: Vec<Eid>,
}

impl EventHistory {
    pub fn new(mut eids: Vec<Eid>) -> Result<Self, ModelError> {
        eids.sort_by_key(Eid::history_key);
        if let Some(w) = eids
            .windows(2)
            .find(|w| w[0].history_key() == w[1].history_key())
        {
            return Err(ModelError::DuplicateHistoryKey(w[0].history_key()));
        }
        Ok(EventHistory { eids })
    }

    pub fn eids(&self) -> &[Eid] {
        &self.eids
    }

    pub fn len(&self) -> usize {
        self.eids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eids.is_empty()
    }

    /// The EIDs whose occurrence time lies in `[t1, t2]`, order preserved.
    pub fn window(&self, t1: Timestamp, t2: Timestamp) -> Result<EventHistory, ModelError> {
        if t1 > t2 {
            return Err(ModelError::InvalidWindow { t1, t2 });
        }
        let eids = self
            .eids
            .iter()
            .filter(|e| e.occ_t().is_some_and(|t| (t1..=t2).contains(&t)))
            .cloned()
            .collect();
        Ok(EventHistory { eids })
    }
}

/// Parses either integer ticks (`"17"`) or a clock time (`"10:45"`, as minutes).
pub fn parse_timestamp(s: &str) -> Result<Timestamp, ModelError> {
    let bad = || ModelError::InvalidTimestamp(s.to_string());
    let s_trim = s.trim();
    match s_trim.split_once(':') {
        None => s_trim.parse().map_err(|_| bad()),
        Some((h, m)) => {
            let h: u64 = h.parse().map_err(|_| bad())?;
            let m: u64 = m.parse().map_err(|_| bad())?;
            if m >= 60 || h.checked_mul(60).is_none() {
                return Err(bad());
            }
            Ok(h * 60 + m)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quote(t: &str, price: i64) -> EidState {
        EidState::Occurred(EventInstance::new(
            "StockQuote",
            parse_timestamp(t).unwrap(),
            [
                ("ticker".to_string(), AttrValue::Str("IBM".into())),
                ("price".to_string(), AttrValue::Int(price)),
            ],
        ))
    }

    fn ibm_eid() -> Eid {
        Eid::explicit(
            "E",
            "StockQuote",
            1,
            vec![
                (EidState::NotOccurred, 0.3),
                (quote("10:34", 105), 0.3),
                (quote("10:45", 100), 0.4),
            ],
        )
        .unwrap()
    }

    fn single(id: &str, seq: u64, t: &str) -> Eid {
        Eid::explicit(id, "StockQuote", seq, vec![(quote(t, 100), 1.0)]).unwrap()
    }

    #[test]
    fn ibm_example_keeps_given_states() {
        let e = ibm_eid();
        assert_eq!(e.domain().len(), 3);
        assert_eq!(e.prior().unwrap(), &[0.3, 0.3, 0.4]);
    }

    #[test]
    fn residual_goes_to_not_occurred() {
        let e = Eid::explicit("E1", "StockQuote", 1, vec![(quote("0:05", 1), 0.6)]).unwrap();
        assert_eq!(e.domain()[0], EidState::NotOccurred);
        assert_eq!(e.prior().unwrap(), &[0.4, 0.6]);
    }

    #[test]
    fn certain_event_has_no_not_occurred_state() {
        let e = single("E", 1, "0:05");
        assert_eq!(e.domain().len(), 1);
        assert!(e.domain()[0].is_occurred());
    }

    #[test]
    fn explicit_rejects_bad_input() {
        assert!(matches!(
            Eid::explicit("E", "StockQuote", 1, vec![]),
            Err(ModelError::EmptyDistribution { .. })
        ));
        assert!(matches!(
            Eid::explicit("E", "StockQuote", 1, vec![(quote("1:00", 1), 1.2)]),
            Err(ModelError::ProbabilityOutOfRange { .. })
        ));
        assert!(matches!(
            Eid::explicit(
                "E",
                "StockQuote",
                1,
                vec![(quote("1:00", 1), 0.7), (quote("1:01", 1), 0.5)]
            ),
            Err(ModelError::ProbabilitySumExceedsOne { .. })
        ));
        assert!(matches!(
            Eid::explicit(
                "E",
                "StockQuote",
                1,
                vec![(quote("1:00", 1), 0.2), (quote("1:00", 1), 0.2)]
            ),
            Err(ModelError::DuplicateState { .. })
        ));
        assert!(matches!(
            Eid::explicit("E", "Other", 1, vec![(quote("1:00", 1), 0.2)]),
            Err(ModelError::MixedTypes { .. })
        ));
        assert!(matches!(
            Eid::explicit(
                "E",
                "StockQuote",
                1,
                vec![(EidState::NotOccurred, 0.2), (quote("1:00", 1), 0.2)]
            ),
            Err(ModelError::NotNormalized { .. })
        ));
    }

    #[test]
    fn subset_probabilities() {
        let e = ibm_eid();
        let occurred = [quote("10:45", 100), quote("10:34", 105)];
        assert_eq!(e.prob_of_subset(&occurred).unwrap(), 0.7);
        assert_eq!(e.prob_of_subset(&[EidState::NotOccurred]).unwrap(), 0.3);
        assert_eq!(e.prob_of_subset(&[]).unwrap(), 0.0);
        assert!((e.prob_of_subset(e.domain()).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            e.prob_of_subset(&[quote("11:00", 1)]),
            Err(ModelError::StateNotInDomain { .. })
        ));
    }

    #[test]
    fn single_occt_validation() {
        match ibm_eid().validate_single_occt() {
            Err(ModelError::MultipleOccurrenceTimes { times, .. }) => {
                assert_eq!(times, vec![634, 645])
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(single("E", 1, "10:00").validate_single_occt().is_ok());
        let never =
            Eid::explicit("N", "StockQuote", 1, vec![(EidState::NotOccurred, 1.0)]).unwrap();
        assert!(never.validate_single_occt().is_ok());
    }

    #[test]
    fn history_windows() {
        let h = EventHistory::new(vec![
            single("e3", 3, "11:00"),
            single("e1", 1, "10:30"),
            single("e2", 2, "10:45"),
        ])
        .unwrap();
        let ids = |h: &EventHistory| {
            h.eids()
                .iter()
                .map(|e| e.id().to_string())
                .collect::<Vec<_>>()
        };
        let t = |s| parse_timestamp(s).unwrap();
        assert_eq!(
            ids(&h.window(t("10:30"), t("10:45")).unwrap()),
            ["e1", "e2"]
        );
        assert_eq!(
            ids(&h.window(t("10:45"), t("11:00")).unwrap()),
            ["e2", "e3"]
        );
        assert_eq!(ids(&h.window(t("10:30"), t("10:35")).unwrap()), ["e1"]);
        assert_eq!(
            ids(&h.window(t("10:30"), t("11:00")).unwrap()),
            ["e1", "e2", "e3"]
        );
        assert!(h.window(t("11:01"), t("12:00")).unwrap().is_empty());
        assert!(h.window(5, 4).is_err());
        assert_eq!(h.window(0, Timestamp::MAX).unwrap(), h);
    }

    #[test]
    fn duplicate_history_keys_rejected() {
        assert!(EventHistory::new(vec![single("a", 1, "1:00"), single("b", 1, "1:00")]).is_err());
    }

    #[test]
    fn timestamps() {
        assert_eq!(parse_timestamp("10:45").unwrap(), 645);
        assert_eq!(parse_timestamp("12").unwrap(), 12);
        assert!(parse_timestamp("10:75").is_err());
        assert!(parse_timestamp("x").is_err());
    }

    #[test]
    fn cross_kind_equality_is_an_error() {
        let a = AttrValue::Int(1);
        assert!(a.try_eq(&AttrValue::Str("1".into())).is_err());
        assert!(a.try_eq(&AttrValue::Int(1)).unwrap());
    }

    #[test]
    fn seq_is_not_part_of_state_identity() {
        let a = EventInstance::new("T", 3, []).with_seq(1);
        let b = EventInstance::new("T", 3, []).with_seq(2);
        assert_eq!(EidState::Occurred(a), EidState::Occurred(b));
    }

    #[test]
    fn schema_checks() {
        assert!(matches!(
            EventSchema::new("T", vec![("occT".into(), AttrKind::Int)], true),
            Err(ModelError::ReservedAttribute { .. })
        ));
        let s = EventSchema::new("T", vec![("a".into(), AttrKind::Int)], true).unwrap();
        assert!(s
            .check(&EventInstance::new(
                "T",
                1,
                [("a".into(), AttrValue::Int(1))]
            ))
            .is_ok());
        assert!(s
            .check(&EventInstance::new(
                "T",
                1,
                [("a".into(), AttrValue::Str("x".into()))]
            ))
            .is_err());
        assert!(s.check(&EventInstance::new("T", 1, [])).is_err());
    }
}
