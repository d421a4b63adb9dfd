//! Rule application over a fully known event history.
//!
//! This is the deterministic kernel shared by CPT construction and the
//! possible-worlds oracle: first-of-type selection, pattern evaluation,
//! attribute mapping and the resulting outcome.

use thiserror::Error;

use crate::event::{EventInstance, HistoryKey, ModelError, Origin, Timestamp};
use crate::rules::{MappingSource, Predicate, Rule, SelItem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemanticsError {
    #[error("two history entries share the key {0:?}")]
    DuplicateKey(HistoryKey),
    #[error("rule {rule}: variable {var} has no attribute {attr}")]
    MissingAttribute {
        rule: String,
        var: usize,
        attr: String,
    },
    #[error("rule {rule}: {source}")]
    Kind {
        rule: String,
        #[source]
        source: ModelError,
    },
    #[error("pattern refers to variable {var} but only {bound} events are bound")]
    Unbound { var: usize, bound: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub origin: Origin,
    pub instance: EventInstance,
}

impl HistoryEntry {
    pub fn key(&self) -> HistoryKey {
        HistoryKey {
            occ_t: self.instance.occ_t,
            origin: self.origin,
            seq: self.instance.seq,
        }
    }
}

/// Occurred events of one possible world, in history order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConcreteHistory {
    entries: Vec<HistoryEntry>,
}

impl ConcreteHistory {
    pub fn new(mut entries: Vec<HistoryEntry>) -> Result<Self, SemanticsError> {
        entries.sort_by_key(HistoryEntry::key);
        if let Some(w) = entries.windows(2).find(|w| w[0].key() == w[1].key()) {
            return Err(SemanticsError::DuplicateKey(w[0].key()));
        }
        Ok(ConcreteHistory { entries })
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Selection<'a> {
    Complete(Vec<&'a EventInstance>),
    Incomplete,
}

/// Binds each selection variable, in order, to the earliest instance of its
/// type that no earlier variable took.
pub fn select_events<'a>(sel: &[SelItem], h: &'a ConcreteHistory) -> Selection<'a> {
    let mut taken = vec![false; h.entries.len()];
    let mut bound = Vec::with_capacity(sel.len());
    for item in sel {
        let hit = h
            .entries
            .iter()
            .enumerate()
            .find(|(i, e)| !taken[*i] && e.instance.type_name == item.type_name);
        match hit {
            Some((i, e)) => {
                taken[i] = true;
                bound.push(&e.instance);
            }
            None => return Selection::Incomplete,
        }
    }
    Selection::Complete(bound)
}

pub fn eval_pattern(
    pattern: &[Predicate],
    bound: &[&EventInstance],
) -> Result<bool, SemanticsError> {
    let get = |var: usize| {
        bound.get(var).copied().ok_or(SemanticsError::Unbound {
            var,
            bound: bound.len(),
        })
    };
    for pred in pattern {
        let holds = match pred {
            Predicate::AbsoluteWindow { var, from, to } => {
                let t = get(*var)?.occ_t;
                *from <= t && to.admits(t)
            }
            Predicate::Before { earlier, later } => get(*earlier)?.occ_t < get(*later)?.occ_t,
            Predicate::RelativeWindow {
                anchor,
                var,
                within,
            } => {
                let a = get(*anchor)?.occ_t;
                let t = get(*var)?.occ_t;
                a <= t && t <= a.saturating_add(*within)
            }
            Predicate::AttrEq {
                left,
                left_attr,
                right,
                right_attr,
            } => {
                let attr = |var: usize, name: &str| {
                    get(var)?
                        .attr(name)
                        .ok_or_else(|| SemanticsError::MissingAttribute {
                            rule: String::new(),
                            var,
                            attr: name.to_string(),
                        })
                };
                let l = attr(*left, left_attr)?;
                let r = attr(*right, right_attr)?;
                l.try_eq(r).map_err(|source| SemanticsError::Kind {
                    rule: String::new(),
                    source,
                })?
            }
        };
        if !holds {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The inferred instance: occurs at `now`, attributes filled by the mappings.
pub fn apply_mapping(
    rule: &Rule,
    bound: &[&EventInstance],
    now: Timestamp,
) -> Result<EventInstance, SemanticsError> {
    let mut attrs = Vec::with_capacity(rule.mappings.len());
    for m in &rule.mappings {
        let value = match &m.source {
            MappingSource::Constant(v) => v.clone(),
            MappingSource::Attr { var, attr } => bound
                .get(*var)
                .and_then(|inst| inst.attr(attr))
                .cloned()
                .ok_or_else(|| SemanticsError::MissingAttribute {
                    rule: rule.id.clone(),
                    var: *var,
                    attr: attr.clone(),
                })?,
        };
        attrs.push((m.target.clone(), value));
    }
    Ok(EventInstance::new(rule.emit_type.clone(), now, attrs))
}

#[derive(Debug, Clone, PartialEq)]
pub enum RuleOutcome {
    /// The pattern holds: the mapped event occurs with probability `prob`.
    Triggered {
        inferred: EventInstance,
        prob: f64,
    },
    NotTriggered,
}

pub fn rule_world_outcome(
    rule: &Rule,
    h: &ConcreteHistory,
    now: Timestamp,
) -> Result<RuleOutcome, SemanticsError> {
    let Selection::Complete(bound) = select_events(&rule.selection, h) else {
        return Ok(RuleOutcome::NotTriggered);
    };
    let tag = |e: SemanticsError| match e {
        SemanticsError::MissingAttribute { var, attr, .. } => SemanticsError::MissingAttribute {
            rule: rule.id.clone(),
            var,
            attr,
        },
        SemanticsError::Kind { source, .. } => SemanticsError::Kind {
            rule: rule.id.clone(),
            source,
        },
        other => other,
    };
    if !eval_pattern(&rule.pattern, &bound).map_err(tag)? {
        return Ok(RuleOutcome::NotTriggered);
    }
    Ok(RuleOutcome::Triggered {
        inferred: apply_mapping(rule, &bound, now)?,
        prob: rule.prob,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::AttrValue;
    use crate::rules::parse_rules;

    const R1: &str = "
explicit type StockSell { stockTicker: string, customerID: string }
explicit type StockPurchase { stockTicker: string, customerID: string }
explicit type StockQuote { stockTicker: string }
explicit type T { }
type IllegalStockTrading { stockTicker: string, customerID: string }
type Flag { flag: int }
rule IllegalTrade priority 10 prob 0.7 {
  select e1: StockSell, e2: StockPurchase;
  where e1.occT <= e2.occT <= e1.occT + 5
    and e1.stockTicker == e2.stockTicker
    and e1.customerID == e2.customerID;
  emit IllegalStockTrading { stockTicker = e1.stockTicker, customerID = e1.customerID };
}
rule Pair priority 5 prob 1 {
  select a: T, b: T;
  where 0 <= a.occT <= inf;
  emit Flag { flag = 1 };
}
";

    fn rules() -> crate::rules::RuleSet {
        parse_rules(R1).unwrap()
    }

    fn trade(ty: &str, t: Timestamp, ticker: &str, seq: u64) -> HistoryEntry {
        let attrs: Vec<(String, AttrValue)> = if ty == "StockQuote" {
            vec![("stockTicker".into(), AttrValue::Str(ticker.into()))]
        } else {
            vec![
                ("stockTicker".into(), AttrValue::Str(ticker.into())),
                ("customerID".into(), AttrValue::Str("C1".into())),
            ]
        };
        HistoryEntry {
            origin: Origin::Explicit,
            instance: EventInstance::new(ty, t, attrs).with_seq(seq),
        }
    }

    fn history(entries: Vec<HistoryEntry>) -> ConcreteHistory {
        ConcreteHistory::new(entries).unwrap()
    }

    #[test]
    fn selects_first_of_each_type() {
        let rs = rules();
        let h = history(vec![
            trade("StockSell", 5, "IBM", 1),
            trade("StockQuote", 7, "IBM", 2),
            trade("StockPurchase", 9, "IBM", 3),
        ]);
        match select_events(&rs.rules[0].selection, &h) {
            Selection::Complete(b) => {
                assert_eq!(b[0].seq, 1);
                assert_eq!(b[1].seq, 3);
            }
            Selection::Incomplete => panic!("expected a selection"),
        }
    }

    #[test]
    fn too_few_events_is_incomplete() {
        let sel = vec![
            SelItem {
                var: "a".into(),
                type_name: "StockQuote".into(),
            },
            SelItem {
                var: "b".into(),
                type_name: "StockQuote".into(),
            },
        ];
        let h = history(vec![trade("StockQuote", 1, "IBM", 1)]);
        assert_eq!(select_events(&sel, &h), Selection::Incomplete);
    }

    #[test]
    fn ties_broken_by_seq() {
        let rs = rules();
        let mk = |seq| HistoryEntry {
            origin: Origin::Explicit,
            instance: EventInstance::new("T", 3, []).with_seq(seq),
        };
        // Insertion order must not matter, only seq.
        for entries in [vec![mk(1), mk(2)], vec![mk(2), mk(1)]] {
            let h = history(entries);
            let Selection::Complete(b) = select_events(&rs.rules[1].selection, &h) else {
                panic!()
            };
            assert_eq!((b[0].seq, b[1].seq), (1, 2));
        }
    }

    #[test]
    fn explicit_before_inferred_at_equal_time() {
        let a = HistoryEntry {
            origin: Origin::Inferred,
            instance: EventInstance::new("T", 3, []).with_seq(0),
        };
        let b = HistoryEntry {
            origin: Origin::Explicit,
            instance: EventInstance::new("T", 3, []).with_seq(9),
        };
        let h = history(vec![a, b]);
        assert_eq!(h.entries()[0].origin, Origin::Explicit);
    }

    #[test]
    fn golden_pattern_triple() {
        let rs = rules();
        let pat = &rs.rules[0].pattern;
        let e1 = trade("StockSell", 5, "IBM", 1).instance;
        let e3 = trade("StockPurchase", 9, "IBM", 3).instance;
        assert!(eval_pattern(pat, &[&e1, &e3]).unwrap());
        let msft = trade("StockPurchase", 9, "MSFT", 3).instance;
        assert!(!eval_pattern(pat, &[&e1, &msft]).unwrap());
        let late = trade("StockPurchase", 11, "IBM", 3).instance;
        assert!(!eval_pattern(pat, &[&e1, &late]).unwrap());
    }

    #[test]
    fn window_bounds_are_inclusive() {
        let rs = rules();
        let pat = &rs.rules[0].pattern;
        let e1 = trade("StockSell", 5, "IBM", 1).instance;
        let edge = trade("StockPurchase", 10, "IBM", 3).instance;
        let same = trade("StockPurchase", 5, "IBM", 3).instance;
        assert!(eval_pattern(pat, &[&e1, &edge]).unwrap());
        assert!(eval_pattern(pat, &[&e1, &same]).unwrap());
    }

    #[test]
    fn cross_kind_equality_is_an_internal_error() {
        let pat = vec![Predicate::AttrEq {
            left: 0,
            left_attr: "x".into(),
            right: 1,
            right_attr: "x".into(),
        }];
        let a = EventInstance::new("A", 1, [("x".into(), AttrValue::Int(1))]);
        let b = EventInstance::new("B", 1, [("x".into(), AttrValue::Str("1".into()))]);
        assert!(matches!(
            eval_pattern(&pat, &[&a, &b]),
            Err(SemanticsError::Kind { .. })
        ));
    }

    #[test]
    fn mapping_sets_occt_to_now() {
        let rs = rules();
        let e1 = trade("StockSell", 5, "IBM", 1).instance;
        let e3 = trade("StockPurchase", 9, "IBM", 3).instance;
        let out = apply_mapping(&rs.rules[0], &[&e1, &e3], 9).unwrap();
        assert_eq!(out.type_name, "IllegalStockTrading");
        assert_eq!(out.occ_t, 9);
        assert_eq!(out.attr("stockTicker"), Some(&AttrValue::Str("IBM".into())));
        assert_eq!(out.attr("customerID"), Some(&AttrValue::Str("C1".into())));

        let t = EventInstance::new("T", 1, []);
        let flag = apply_mapping(&rs.rules[1], &[&t, &t], 4).unwrap();
        assert_eq!(flag.attr("flag"), Some(&AttrValue::Int(1)));
    }

    #[test]
    fn mapping_from_second_sell() {
        let rs = rules();
        let e2 = trade("StockSell", 9, "IBM", 2).instance;
        let e3 = trade("StockPurchase", 12, "IBM", 3).instance;
        let out = apply_mapping(&rs.rules[0], &[&e2, &e3], 12).unwrap();
        assert_eq!(out.occ_t, 12);
        assert_eq!(out.attr("stockTicker"), Some(&AttrValue::Str("IBM".into())));
    }

    #[test]
    fn world_outcomes() {
        let rs = rules();
        let r1 = &rs.rules[0];
        let worked = history(vec![
            trade("StockSell", 5, "IBM", 1),
            trade("StockQuote", 7, "IBM", 2),
            trade("StockPurchase", 9, "IBM", 3),
        ]);
        match rule_world_outcome(r1, &worked, 9).unwrap() {
            RuleOutcome::Triggered { prob, inferred } => {
                assert_eq!(prob, 0.7);
                assert_eq!(inferred.occ_t, 9);
            }
            RuleOutcome::NotTriggered => panic!("rule should trigger"),
        }
        let only_purchase = history(vec![trade("StockPurchase", 9, "IBM", 3)]);
        assert_eq!(
            rule_world_outcome(r1, &only_purchase, 9).unwrap(),
            RuleOutcome::NotTriggered
        );
        let too_late = history(vec![
            trade("StockSell", 5, "IBM", 1),
            trade("StockPurchase", 12, "IBM", 3),
        ]);
        assert_eq!(
            rule_world_outcome(r1, &too_late, 12).unwrap(),
            RuleOutcome::NotTriggered
        );
    }
}
