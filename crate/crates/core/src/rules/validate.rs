use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::ast::{MappingSource, Predicate, Rule, RuleSet, TimeBound};
use crate::event::AttrKind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("rule dependency cycle: {}", path.join(" -> "))]
    CycleDetected { path: Vec<String> },
    #[error("rules {first} and {second} share priority {priority}")]
    DuplicatePriority {
        first: String,
        second: String,
        priority: i64,
    },
    #[error("event type {type_name} is emitted by several rules: {}", rules.join(", "))]
    TypeInferredTwice {
        type_name: String,
        rules: Vec<String>,
    },
    #[error("rule {rule} emits {type_name}, which is declared explicit")]
    ExplicitTypeEmitted { type_name: String, rule: String },
    #[error("rule {rule}: kind mismatch in {detail}")]
    KindMismatch { rule: String, detail: String },
    #[error("rule {rule}: {detail}")]
    MalformedPredicate { rule: String, detail: String },
    #[error("rule {rule}: {detail}")]
    MappingCoverage { rule: String, detail: String },
    #[error("rule {rule}: unknown event type {type_name}")]
    UnknownType { rule: String, type_name: String },
    #[error("rule {rule}: event type {type_name} has no attribute {attr}")]
    UnknownAttribute {
        rule: String,
        type_name: String,
        attr: String,
    },
    #[error("rule {rule}: variable index {index} not bound by the selection")]
    UnboundVariable { rule: String, index: usize },
    #[error("rule {rule}: {detail}")]
    MalformedSelection { rule: String, detail: String },
    #[error("rule {rule}: probability {prob} outside [0, 1]")]
    ProbabilityOutOfRange { rule: String, prob: f64 },
    #[error("rule id {0} used twice")]
    DuplicateRuleId(String),
}

/// Checks every rule-set invariant and reports all violations found.
pub fn validate_ruleset(rs: &RuleSet) -> Result<(), Vec<ValidationError>> {
    let mut errors = Vec::new();

    let mut ids = BTreeSet::new();
    for rule in &rs.rules {
        if !ids.insert(rule.id.as_str()) {
            errors.push(ValidationError::DuplicateRuleId(rule.id.clone()));
        }
        check_rule(rs, rule, &mut errors);
    }

    let mut by_priority: BTreeMap<i64, Vec<&Rule>> = BTreeMap::new();
    for rule in &rs.rules {
        by_priority.entry(rule.priority).or_default().push(rule);
    }
    for (priority, group) in by_priority {
        for other in group.iter().skip(1) {
            errors.push(ValidationError::DuplicatePriority {
                first: group[0].id.clone(),
                second: other.id.clone(),
                priority,
            });
        }
    }

    let mut emitters: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for rule in &rs.rules {
        emitters
            .entry(rule.emit_type.as_str())
            .or_default()
            .push(rule.id.clone());
        if rs.schemas.get(&rule.emit_type).is_some_and(|s| s.explicit) {
            errors.push(ValidationError::ExplicitTypeEmitted {
                type_name: rule.emit_type.clone(),
                rule: rule.id.clone(),
            });
        }
    }
    for (type_name, rules) in emitters {
        if rules.len() > 1 {
            errors.push(ValidationError::TypeInferredTwice {
                type_name: type_name.to_string(),
                rules,
            });
        }
    }

    for path in find_cycles(&type_graph(rs)) {
        errors.push(ValidationError::CycleDetected { path });
    }

    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

fn check_rule(rs: &RuleSet, rule: &Rule, errors: &mut Vec<ValidationError>) {
    let rid = || rule.id.clone();
    if !(0.0..=1.0).contains(&rule.prob) {
        errors.push(ValidationError::ProbabilityOutOfRange {
            rule: rid(),
            prob: rule.prob,
        });
    }
    if rule.selection.is_empty() {
        errors.push(ValidationError::MalformedSelection {
            rule: rid(),
            detail: "selection is empty".into(),
        });
    }
    let mut vars = BTreeSet::new();
    for item in &rule.selection {
        if !vars.insert(item.var.as_str()) {
            errors.push(ValidationError::MalformedSelection {
                rule: rid(),
                detail: format!("variable {} bound twice", item.var),
            });
        }
        if rs.schemas.get(&item.type_name).is_none() {
            errors.push(ValidationError::UnknownType {
                rule: rid(),
                type_name: item.type_name.clone(),
            });
        }
    }

    // Kind of `var.attr`, or None after reporting the problem.
    let attr_kind = |var: usize, attr: &str, errors: &mut Vec<ValidationError>| {
        let Some(item) = rule.selection.get(var) else {
            errors.push(ValidationError::UnboundVariable {
                rule: rid(),
                index: var,
            });
            return None;
        };
        let schema = rs.schemas.get(&item.type_name)?;
        let kind = schema.kind_of(attr);
        if kind.is_none() {
            errors.push(ValidationError::UnknownAttribute {
                rule: rid(),
                type_name: item.type_name.clone(),
                attr: attr.to_string(),
            });
        }
        kind
    };

    for pred in &rule.pattern {
        for v in pred.vars() {
            if v >= rule.arity() {
                errors.push(ValidationError::UnboundVariable {
                    rule: rid(),
                    index: v,
                });
            }
        }
        let malformed = |detail: &str| ValidationError::MalformedPredicate {
            rule: rid(),
            detail: detail.to_string(),
        };
        match pred {
            Predicate::AbsoluteWindow { from, to, .. } => {
                if let TimeBound::At(to) = to {
                    if from > to {
                        errors.push(malformed(
                            "absolute window with lower bound above upper bound",
                        ));
                    }
                }
            }
            Predicate::Before { earlier, later } => {
                if earlier == later {
                    errors.push(malformed("ordering predicate relates a variable to itself"));
                }
            }
            Predicate::RelativeWindow {
                anchor,
                var,
                within,
            } => {
                if anchor == var {
                    errors.push(malformed("relative window relates a variable to itself"));
                }
                if *within == 0 {
                    errors.push(malformed("relative window width must be positive"));
                }
            }
            Predicate::AttrEq {
                left,
                left_attr,
                right,
                right_attr,
            } => {
                if left == right {
                    errors.push(malformed("equality relates a variable to itself"));
                }
                let lk = attr_kind(*left, left_attr, errors);
                let rk = attr_kind(*right, right_attr, errors);
                if let (Some(lk), Some(rk)) = (lk, rk) {
                    if lk != rk {
                        errors.push(ValidationError::KindMismatch {
                            rule: rid(),
                            detail: format!(
                                "equality of {left_attr} ({lk}) with {right_attr} ({rk})"
                            ),
                        });
                    }
                }
            }
        }
    }

    let Some(emit) = rs.schemas.get(&rule.emit_type) else {
        errors.push(ValidationError::UnknownType {
            rule: rid(),
            type_name: rule.emit_type.clone(),
        });
        return;
    };
    let mut covered: BTreeMap<&str, usize> = BTreeMap::new();
    for m in &rule.mappings {
        let Some(target_kind) = emit.kind_of(&m.target) else {
            errors.push(ValidationError::UnknownAttribute {
                rule: rid(),
                type_name: emit.type_name.clone(),
                attr: m.target.clone(),
            });
            continue;
        };
        *covered.entry(m.target.as_str()).or_default() += 1;
        let source_kind: Option<AttrKind> = match &m.source {
            MappingSource::Attr { var, attr } => attr_kind(*var, attr, errors),
            MappingSource::Constant(value) => Some(value.kind()),
        };
        if let Some(sk) = source_kind {
            if sk != target_kind {
                errors.push(ValidationError::KindMismatch {
                    rule: rid(),
                    detail: format!("mapping {sk} into {} ({target_kind})", m.target),
                });
            }
        }
    }
    for (name, _) in &emit.attributes {
        match covered.get(name.as_str()).copied().unwrap_or(0) {
            1 => {}
            0 => errors.push(ValidationError::MappingCoverage {
                rule: rid(),
                detail: format!("attribute {name} of {} is not mapped", emit.type_name),
            }),
            n => errors.push(ValidationError::MappingCoverage {
                rule: rid(),
                detail: format!("attribute {name} of {} is mapped {n} times", emit.type_name),
            }),
        }
    }
}

/// Edges from every selected type to the emitted type.
pub(crate) fn type_graph(rs: &RuleSet) -> BTreeMap<String, BTreeSet<String>> {
    let mut graph: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for rule in &rs.rules {
        graph.entry(rule.emit_type.clone()).or_default();
        for item in &rule.selection {
            graph
                .entry(item.type_name.clone())
                .or_default()
                .insert(rule.emit_type.clone());
        }
    }
    graph
}

/// One witness path per back edge found by a depth-first search.
pub(crate) fn find_cycles(graph: &BTreeMap<String, BTreeSet<String>>) -> Vec<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        OnStack,
        Done,
    }

    fn visit<'a>(
        node: &'a str,
        graph: &'a BTreeMap<String, BTreeSet<String>>,
        marks: &mut BTreeMap<&'a str, Mark>,
        stack: &mut Vec<&'a str>,
        cycles: &mut Vec<Vec<String>>,
    ) {
        marks.insert(node, Mark::OnStack);
        stack.push(node);
        for next in graph.get(node).into_iter().flatten() {
            match marks.get(next.as_str()).copied().unwrap_or(Mark::Fresh) {
                Mark::Fresh => visit(next, graph, marks, stack, cycles),
                Mark::OnStack => {
                    let start = stack.iter().position(|n| *n == next).unwrap();
                    let mut path: Vec<String> =
                        stack[start..].iter().map(|s| s.to_string()).collect();
                    path.push(next.clone());
                    cycles.push(path);
                }
                Mark::Done => {}
            }
        }
        stack.pop();
        marks.insert(node, Mark::Done);
    }

    let mut marks = BTreeMap::new();
    let mut cycles = Vec::new();
    for node in graph.keys() {
        if marks.get(node.as_str()).copied().unwrap_or(Mark::Fresh) == Mark::Fresh {
            visit(node, graph, &mut marks, &mut Vec::new(), &mut cycles);
        }
    }
    cycles
}

/// Rules by decreasing priority. Ties, which validation rules out, fall back
/// to the rule id so the order stays total.
pub fn rule_eval_order(rs: &RuleSet) -> Vec<&Rule> {
    let mut rules: Vec<&Rule> = rs.rules.iter().collect();
    rules.sort_by(|a, b| b.priority.cmp(&a.priority).then_with(|| a.id.cmp(&b.id)));
    rules
}

/// Decreasing priority, except that a rule always comes after the rules
/// producing the types it selects.
pub fn dependency_order(rs: &RuleSet) -> Vec<&Rule> {
    let by_priority = rule_eval_order(rs);
    let mut placed: BTreeSet<&str> = BTreeSet::new();
    let mut order = Vec::with_capacity(by_priority.len());
    while order.len() < by_priority.len() {
        let ready = by_priority.iter().find(|r| {
            !placed.contains(r.id.as_str())
                && r.selection.iter().all(|item| {
                    by_priority
                        .iter()
                        .filter(|p| p.emit_type == item.type_name)
                        .all(|p| placed.contains(p.id.as_str()))
                })
        });
        // A cycle leaves nothing ready; fall back to plain priority order.
        let next = ready
            .or_else(|| by_priority.iter().find(|r| !placed.contains(r.id.as_str())))
            .copied()
            .expect("unplaced rule exists");
        placed.insert(&next.id);
        order.push(next);
    }
    order
}
