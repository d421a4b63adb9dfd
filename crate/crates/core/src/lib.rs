//! Probabilistic complex event processing.
//!
//! Uncertain events are modelled as finite-domain random variables ([`Eid`]).
//! Probabilistic temporal rules ([`Rule`]) infer new events from them, and a
//! Bayesian network ([`BayesNetwork`]) is grown incrementally as events
//! arrive so that occurrence probabilities can be computed exactly. The
//! [`oracle`] module enumerates possible worlds as an independent reference.

mod assign;
pub mod distribution;
pub mod engine;
pub mod event;
pub mod fuzz;
pub mod network;
pub mod oracle;
pub mod rules;
pub mod semantics;

pub use distribution::Distribution;
pub use engine::{Engine, EngineError, Query, Report};
pub use event::{
    parse_timestamp, AttrKind, AttrValue, Eid, EidKind, EidState, EventHistory, EventInstance,
    EventSchema, HistoryKey, ModelError, Origin, SchemaRegistry, Timestamp,
};
pub use network::{BayesNetwork, Cpt, NetworkError};
pub use oracle::{Comparison, OracleError, WorldSet};
pub use rules::{parse_rules, validate_ruleset, ParseError, Rule, RuleSet, ValidationError};
