use std::fmt;

use crate::event::{AttrValue, SchemaRegistry, Timestamp, OCC_T};

/// One `var : EventType` binding of a selection expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelItem {
    pub var: String,
    pub type_name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeBound {
    At(Timestamp),
    Infinity,
}

impl TimeBound {
    pub fn admits(self, t: Timestamp) -> bool {
        match self {
            TimeBound::At(bound) => t <= bound,
            TimeBound::Infinity => true,
        }
    }
}

impl fmt::Display for TimeBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeBound::At(t) => write!(f, "{t}"),
            TimeBound::Infinity => f.write_str("inf"),
        }
    }
}

/// A conjunct of a rule pattern. Variables are indices into the selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    /// `from <= var.occT <= to`
    AbsoluteWindow {
        var: usize,
        from: Timestamp,
        to: TimeBound,
    },
    /// `earlier.occT < later.occT`
    Before { earlier: usize, later: usize },
    /// `anchor.occT <= var.occT <= anchor.occT + within`
    RelativeWindow {
        anchor: usize,
        var: usize,
        within: Timestamp,
    },
    /// `left.left_attr == right.right_attr`
    AttrEq {
        left: usize,
        left_attr: String,
        right: usize,
        right_attr: String,
    },
}

impl Predicate {
    pub fn vars(&self) -> Vec<usize> {
        match self {
            Predicate::AbsoluteWindow { var, .. } => vec![*var],
            Predicate::Before { earlier, later } => vec![*earlier, *later],
            Predicate::RelativeWindow { anchor, var, .. } => vec![*anchor, *var],
            Predicate::AttrEq { left, right, .. } => vec![*left, *right],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MappingSource {
    Attr { var: usize, attr: String },
    Constant(AttrValue),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mapping {
    pub target: String,
    pub source: MappingSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub id: String,
    pub selection: Vec<SelItem>,
    pub pattern: Vec<Predicate>,
    pub emit_type: String,
    pub mappings: Vec<Mapping>,
    pub prob: f64,
    pub priority: i64,
}

impl Rule {
    pub fn arity(&self) -> usize {
        self.selection.len()
    }

    pub fn selects_type(&self, type_name: &str) -> bool {
        self.selection.iter().any(|s| s.type_name == type_name)
    }

    fn var(&self, idx: usize) -> &str {
        self.selection
            .get(idx)
            .map(|s| s.var.as_str())
            .unwrap_or("?")
    }
}

/// Schemas plus rules, as read from one rule file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleSet {
    pub schemas: SchemaRegistry,
    pub rules: Vec<Rule>,
}

impl RuleSet {
    pub fn rule(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// The rule emitting `type_name`, if any.
    pub fn producer_of(&self, type_name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.emit_type == type_name)
    }

    pub fn is_inferred_type(&self, type_name: &str) -> bool {
        self.producer_of(type_name).is_some()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "rule {} priority {} prob {:?} {{",
            self.id, self.priority, self.prob
        )?;
        let sel = self
            .selection
            .iter()
            .map(|s| format!("{}: {}", s.var, s.type_name))
            .collect::<Vec<_>>()
            .join(", ");
        writeln!(f, "  select {sel};")?;
        let preds = self
            .pattern
            .iter()
            .map(|p| match p {
                Predicate::AbsoluteWindow { var, from, to } => {
                    format!("{from} <= {}.{OCC_T} <= {to}", self.var(*var))
                }
                Predicate::Before { earlier, later } => {
                    format!(
                        "{}.{OCC_T} < {}.{OCC_T}",
                        self.var(*earlier),
                        self.var(*later)
                    )
                }
                Predicate::RelativeWindow {
                    anchor,
                    var,
                    within,
                } => {
                    let a = self.var(*anchor);
                    format!(
                        "{a}.{OCC_T} <= {}.{OCC_T} <= {a}.{OCC_T} + {within}",
                        self.var(*var)
                    )
                }
                Predicate::AttrEq {
                    left,
                    left_attr,
                    right,
                    right_attr,
                } => format!(
                    "{}.{left_attr} == {}.{right_attr}",
                    self.var(*left),
                    self.var(*right)
                ),
            })
            .collect::<Vec<_>>()
            .join("\n    and ");
        writeln!(f, "  where {preds};")?;
        let maps = self
            .mappings
            .iter()
            .map(|m| match &m.source {
                MappingSource::Attr { var, attr } => {
                    format!("{} = {}.{attr}", m.target, self.var(*var))
                }
                MappingSource::Constant(value) => format!("{} = {value}", m.target),
            })
            .collect::<Vec<_>>()
            .join(", ");
        writeln!(f, "  emit {} {{ {maps} }};", self.emit_type)?;
        f.write_str("}\n")
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for schema in self.schemas.iter() {
            let attrs = schema
                .attributes
                .iter()
                .map(|(name, kind)| format!("{name}: {kind}"))
                .collect::<Vec<_>>()
                .join(", ");
            let marker = if schema.explicit { "explicit " } else { "" };
            writeln!(f, "{marker}type {} {{ {attrs} }}", schema.type_name)?;
        }
        for rule in &self.rules {
            writeln!(f)?;
            write!(f, "{rule}")?;
        }
        Ok(())
    }
}
