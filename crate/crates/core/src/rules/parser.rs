//! Recursive-descent parser for rule files.
//!
//! Parsing runs in two passes: the syntactic pass builds positioned raw
//! declarations, then name resolution turns variable names into selection
//! indices and checks types and attributes against the declared schemas.
//! Types may be declared after the rules that use them.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use rust_decimal::Decimal;

use super::ast::{Mapping, MappingSource, Predicate, Rule, RuleSet, SelItem, TimeBound};
use super::lexer::{tokenize, Pos, Tok, Token};
use super::ParseError;
use crate::event::{AttrKind, AttrValue, EventSchema, SchemaRegistry, Timestamp, OCC_T};

struct RawSchema {
    pos: Pos,
    name: String,
    explicit: bool,
    attrs: Vec<(String, AttrKind)>,
}

#[derive(Clone)]
struct VarRef {
    var: String,
    attr: String,
    pos: Pos,
}

enum RawPred {
    Absolute {
        from: Timestamp,
        target: VarRef,
        to: TimeBound,
    },
    Before(VarRef, VarRef),
    Relative {
        anchor: VarRef,
        target: VarRef,
        anchor_again: VarRef,
        within: Timestamp,
    },
    Eq(VarRef, VarRef),
}

enum RawLiteral {
    Str(String),
    Int(i64),
    Decimal(Decimal),
}

enum RawSource {
    Attr(VarRef),
    Literal(RawLiteral),
}

struct RawMapping {
    target: String,
    pos: Pos,
    source: RawSource,
}

struct RawRule {
    pos: Pos,
    id: String,
    priority: i64,
    prob: f64,
    prob_pos: Pos,
    selection: Vec<(String, String, Pos)>,
    pattern: Vec<RawPred>,
    emit: (String, Pos),
    mappings: Vec<RawMapping>,
}

struct Parser {
    tokens: Vec<Token>,
    idx: usize,
    depth: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.idx].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.idx + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.idx].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.idx].clone();
        match t.tok {
            Tok::LBrace => self.depth += 1,
            Tok::RBrace => self.depth = self.depth.saturating_sub(1),
            Tok::Eof => return t,
            _ => {}
        }
        self.idx += 1;
        t
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        ParseError::new(
            self.pos(),
            format!("unexpected {}", self.peek().describe()),
            Some(expected.to_string()),
        )
    }

    fn expect(&mut self, tok: Tok) -> PResult<Pos> {
        if *self.peek() == tok {
            Ok(self.bump().pos)
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> PResult<Pos> {
        if self.is_keyword(kw) {
            Ok(self.bump().pos)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Pos)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let pos = self.bump().pos;
                Ok((s, pos))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn int(&mut self, what: &str) -> PResult<(u64, Pos)> {
        match *self.peek() {
            Tok::Int(i) => {
                let pos = self.bump().pos;
                Ok((i, pos))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn at_decl_start(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == "rule" || s == "type" || s == "explicit")
    }

    /// Skips to the next top-level declaration after an error.
    fn recover(&mut self) {
        if !matches!(self.peek(), Tok::Eof) {
            self.bump();
        }
        loop {
            match self.peek() {
                Tok::Eof => return,
                _ if self.at_decl_start() && (self.depth == 0 || self.pos().col == 1) => {
                    self.depth = 0;
                    return;
                }
                _ => {
                    self.bump();
                }
            }
        }
    }

    fn schema(&mut self) -> PResult<RawSchema> {
        let explicit = self.is_keyword("explicit");
        if explicit {
            self.bump();
        }
        let pos = self.keyword("type")?;
        let (name, _) = self.ident("event type name")?;
        self.expect(Tok::LBrace)?;
        let mut attrs = Vec::new();
        while !matches!(self.peek(), Tok::RBrace) {
            let (attr, _) = self.ident("attribute name or `}`")?;
            self.expect(Tok::Colon)?;
            let kind = match self.peek().clone() {
                Tok::Ident(k) => AttrKind::from_keyword(&k),
                _ => None,
            }
            .ok_or_else(|| self.unexpected("`string`, `int` or `decimal`"))?;
            self.bump();
            attrs.push((attr, kind));
            if matches!(self.peek(), Tok::Comma | Tok::Semi) {
                self.bump();
            }
        }
        self.expect(Tok::RBrace)?;
        Ok(RawSchema {
            pos,
            name,
            explicit,
            attrs,
        })
    }

    fn var_ref(&mut self) -> PResult<VarRef> {
        let (var, pos) = self.ident("event variable")?;
        self.expect(Tok::Dot)?;
        let (attr, _) = self.ident("attribute name")?;
        Ok(VarRef { var, attr, pos })
    }

    fn occ_ref(&mut self) -> PResult<VarRef> {
        let r = self.var_ref()?;
        if r.attr != OCC_T {
            return Err(ParseError::new(
                r.pos,
                format!(
                    "temporal predicates compare occT, found `{}.{}`",
                    r.var, r.attr
                ),
                Some(format!("`{}.{OCC_T}`", r.var)),
            ));
        }
        Ok(r)
    }

    fn time(&mut self) -> PResult<(TimeBound, Pos)> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok((TimeBound::At(i), pos))
            }
            Tok::Ident(s) if s == "inf" => {
                self.bump();
                Ok((TimeBound::Infinity, pos))
            }
            _ => Err(self.unexpected("time constant or `inf`")),
        }
    }

    fn predicate(&mut self) -> PResult<RawPred> {
        let starts_with_time = match self.peek() {
            Tok::Int(_) => true,
            Tok::Ident(s) if s == "inf" => !matches!(self.peek_at(1), Tok::Dot),
            _ => false,
        };
        if starts_with_time {
            let (from, from_pos) = self.time()?;
            let from = match from {
                TimeBound::At(t) => t,
                TimeBound::Infinity => {
                    return Err(ParseError::new(
                        from_pos,
                        "window lower bound must be finite",
                        Some("integer time constant".into()),
                    ))
                }
            };
            self.expect(Tok::Le)?;
            let target = self.occ_ref()?;
            self.expect(Tok::Le)?;
            let (to, _) = self.time()?;
            return Ok(RawPred::Absolute { from, target, to });
        }

        let left = self.var_ref()?;
        if left.attr != OCC_T {
            self.expect(Tok::EqEq)?;
            let right = self.var_ref()?;
            return Ok(RawPred::Eq(left, right));
        }
        match self.peek() {
            Tok::Lt => {
                self.bump();
                let right = self.occ_ref()?;
                Ok(RawPred::Before(left, right))
            }
            Tok::Le => {
                self.bump();
                let target = self.occ_ref()?;
                self.expect(Tok::Le)?;
                let anchor_again = self.occ_ref()?;
                self.expect(Tok::Plus)?;
                let (within, _) = self.int("time constant")?;
                Ok(RawPred::Relative {
                    anchor: left,
                    target,
                    anchor_again,
                    within,
                })
            }
            _ => Err(self.unexpected("`<` or `<=`")),
        }
    }

    fn literal(&mut self) -> PResult<RawLiteral> {
        let negative = matches!(self.peek(), Tok::Minus);
        if negative {
            self.bump();
        }
        let pos = self.pos();
        let lit = match self.peek().clone() {
            Tok::Str(s) if !negative => RawLiteral::Str(s),
            Tok::Int(i) => {
                let v = i128::from(i) * if negative { -1 } else { 1 };
                let v = i64::try_from(v)
                    .map_err(|_| ParseError::new(pos, "integer literal out of range", None))?;
                RawLiteral::Int(v)
            }
            Tok::Decimal(d) => {
                let d = Decimal::from_str(&d)
                    .map_err(|_| ParseError::new(pos, "decimal literal out of range", None))?;
                RawLiteral::Decimal(if negative { -d } else { d })
            }
            _ => return Err(self.unexpected("literal or `var.attribute`")),
        };
        self.bump();
        Ok(lit)
    }

    fn mapping(&mut self) -> PResult<RawMapping> {
        let (target, pos) = self.ident("attribute name")?;
        self.expect(Tok::Assign)?;
        let source = if matches!(self.peek(), Tok::Ident(_)) && matches!(self.peek_at(1), Tok::Dot)
        {
            RawSource::Attr(self.var_ref()?)
        } else {
            RawSource::Literal(self.literal()?)
        };
        Ok(RawMapping {
            target,
            pos,
            source,
        })
    }

    fn rule(&mut self) -> PResult<RawRule> {
        let pos = self.keyword("rule")?;
        let (id, _) = self.ident("rule name")?;
        self.keyword("priority")?;
        let neg = matches!(self.peek(), Tok::Minus);
        if neg {
            self.bump();
        }
        let (p, p_pos) = self.int("integer priority")?;
        let priority = i64::try_from(p)
            .map(|p| if neg { -p } else { p })
            .map_err(|_| ParseError::new(p_pos, "priority out of range", None))?;
        self.keyword("prob")?;
        let prob_pos = self.pos();
        let neg = matches!(self.peek(), Tok::Minus);
        if neg {
            self.bump();
        }
        let prob: f64 = match self.peek().clone() {
            Tok::Int(i) => i as f64,
            Tok::Decimal(d) => d.parse().expect("lexer yields well-formed decimals"),
            _ => return Err(self.unexpected("probability")),
        };
        self.bump();
        let prob = if neg { -prob } else { prob };
        self.expect(Tok::LBrace)?;

        self.keyword("select")?;
        let mut selection = Vec::new();
        loop {
            let (var, vpos) = self.ident("event variable")?;
            self.expect(Tok::Colon)?;
            let (ty, _) = self.ident("event type name")?;
            selection.push((var, ty, vpos));
            if matches!(self.peek(), Tok::Comma) {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(Tok::Semi)?;

        self.keyword("where")?;
        let mut pattern = vec![self.predicate()?];
        while self.is_keyword("and") {
            self.bump();
            pattern.push(self.predicate()?);
        }
        self.expect(Tok::Semi)?;

        self.keyword("emit")?;
        let emit = self.ident("event type name")?;
        self.expect(Tok::LBrace)?;
        let mut mappings = Vec::new();
        while !matches!(self.peek(), Tok::RBrace) {
            mappings.push(self.mapping()?);
            if matches!(self.peek(), Tok::Comma) {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(Tok::RBrace)?;
        self.expect(Tok::Semi)?;
        self.expect(Tok::RBrace)?;

        Ok(RawRule {
            pos,
            id,
            priority,
            prob,
            prob_pos,
            selection,
            pattern,
            emit,
            mappings,
        })
    }
}

/// Parses a rule file into a [`RuleSet`]. Either every declaration is
/// accepted or all errors found are returned, each with a position.
pub fn parse_rules(src: &str) -> Result<RuleSet, Vec<ParseError>> {
    let tokens = tokenize(src)?;
    let mut p = Parser {
        tokens,
        idx: 0,
        depth: 0,
    };
    let mut errors = Vec::new();
    let mut schemas = Vec::new();
    let mut rules = Vec::new();
    loop {
        p.depth = 0;
        let result = match p.peek() {
            Tok::Eof => break,
            Tok::Ident(s) if s == "type" || s == "explicit" => p.schema().map(|s| schemas.push(s)),
            Tok::Ident(s) if s == "rule" => p.rule().map(|r| rules.push(r)),
            _ => Err(p.unexpected("`type`, `explicit type` or `rule`")),
        };
        if let Err(e) = result {
            errors.push(e);
            p.recover();
        }
    }

    let mut registry = SchemaRegistry::new();
    for raw in schemas {
        let added =
            EventSchema::new(raw.name, raw.attrs, raw.explicit).and_then(|s| registry.insert(s));
        if let Err(e) = added {
            errors.push(ParseError::new(raw.pos, e.to_string(), None));
        }
    }

    let mut seen_ids = BTreeSet::new();
    let mut resolved = Vec::new();
    for raw in rules {
        if !seen_ids.insert(raw.id.clone()) {
            errors.push(ParseError::new(
                raw.pos,
                format!("rule {} declared twice", raw.id),
                None,
            ));
            continue;
        }
        match resolve_rule(raw, &registry) {
            Ok(rule) => resolved.push(rule),
            Err(mut errs) => errors.append(&mut errs),
        }
    }

    if errors.is_empty() {
        Ok(RuleSet {
            schemas: registry,
            rules: resolved,
        })
    } else {
        errors.sort_by_key(|e| (e.line, e.col));
        Err(errors)
    }
}

struct Scope<'a> {
    vars: BTreeMap<&'a str, (usize, &'a str)>,
    registry: &'a SchemaRegistry,
}

impl Scope<'_> {
    fn var(&self, r: &VarRef) -> Result<usize, ParseError> {
        self.vars
            .get(r.var.as_str())
            .map(|(idx, _)| *idx)
            .ok_or_else(|| {
                ParseError::new(
                    r.pos,
                    format!("unknown variable `{}`", r.var),
                    Some("a variable bound by `select`".into()),
                )
            })
    }

    /// Resolves `var.attr` where attr must be a declared (non-occT) attribute.
    fn attr(&self, r: &VarRef) -> Result<usize, ParseError> {
        let idx = self.var(r)?;
        if r.attr == OCC_T {
            return Err(ParseError::new(
                r.pos,
                "occT cannot be used in equalities or mappings",
                None,
            ));
        }
        let ty = self.vars[r.var.as_str()].1;
        match self.registry.get(ty) {
            Some(schema) if schema.kind_of(&r.attr).is_none() => Err(ParseError::new(
                r.pos,
                format!("unknown attribute `{}` of event type {ty}", r.attr),
                None,
            )),
            // Unknown types are reported at the selection.
            _ => Ok(idx),
        }
    }
}

fn resolve_rule(raw: RawRule, registry: &SchemaRegistry) -> Result<Rule, Vec<ParseError>> {
    let mut errors = Vec::new();
    if !(0.0..=1.0).contains(&raw.prob) {
        errors.push(ParseError::new(
            raw.prob_pos,
            format!("probability out of range: {} is not in [0, 1]", raw.prob),
            None,
        ));
    }

    let mut scope = Scope {
        vars: BTreeMap::new(),
        registry,
    };
    for (i, (var, ty, pos)) in raw.selection.iter().enumerate() {
        if registry.get(ty).is_none() {
            errors.push(ParseError::new(
                *pos,
                format!("unknown event type {ty}"),
                None,
            ));
        }
        if scope.vars.insert(var, (i, ty)).is_some() {
            errors.push(ParseError::new(
                *pos,
                format!("variable `{var}` bound twice"),
                None,
            ));
        }
    }

    let mut pattern = Vec::new();
    for pred in &raw.pattern {
        let resolved = match pred {
            RawPred::Absolute { from, target, to } => {
                scope.var(target).map(|var| Predicate::AbsoluteWindow {
                    var,
                    from: *from,
                    to: *to,
                })
            }
            RawPred::Before(a, b) => scope.var(a).and_then(|earlier| {
                scope
                    .var(b)
                    .map(|later| Predicate::Before { earlier, later })
            }),
            RawPred::Relative {
                anchor,
                target,
                anchor_again,
                within,
            } => {
                if anchor.var != anchor_again.var {
                    Err(ParseError::new(
                        anchor_again.pos,
                        "a relative window must use the same anchor on both sides",
                        Some(format!("`{}.{OCC_T}`", anchor.var)),
                    ))
                } else {
                    scope.var(anchor).and_then(|a| {
                        scope.var(target).map(|v| Predicate::RelativeWindow {
                            anchor: a,
                            var: v,
                            within: *within,
                        })
                    })
                }
            }
            RawPred::Eq(l, r) => scope.attr(l).and_then(|left| {
                scope.attr(r).map(|right| Predicate::AttrEq {
                    left,
                    left_attr: l.attr.clone(),
                    right,
                    right_attr: r.attr.clone(),
                })
            }),
        };
        match resolved {
            Ok(p) => pattern.push(p),
            Err(e) => errors.push(e),
        }
    }

    let (emit_type, emit_pos) = raw.emit;
    let emit_schema = registry.get(&emit_type);
    if emit_schema.is_none() {
        errors.push(ParseError::new(
            emit_pos,
            format!("unknown event type {emit_type}"),
            None,
        ));
    }

    let mut mappings = Vec::new();
    for m in raw.mappings {
        let target_kind = emit_schema.and_then(|s| s.kind_of(&m.target));
        if m.target == OCC_T {
            errors.push(ParseError::new(
                m.pos,
                "occT of an inferred event is the inference time and cannot be mapped",
                None,
            ));
            continue;
        }
        if emit_schema.is_some() && target_kind.is_none() {
            errors.push(ParseError::new(
                m.pos,
                format!("unknown attribute `{}` of event type {emit_type}", m.target),
                None,
            ));
            continue;
        }
        let source = match m.source {
            RawSource::Attr(r) => match scope.attr(&r) {
                Ok(var) => MappingSource::Attr { var, attr: r.attr },
                Err(e) => {
                    errors.push(e);
                    continue;
                }
            },
            RawSource::Literal(lit) => MappingSource::Constant(match lit {
                RawLiteral::Str(s) => AttrValue::Str(s),
                RawLiteral::Int(i) if target_kind == Some(AttrKind::Decimal) => {
                    AttrValue::Decimal(Decimal::from(i))
                }
                RawLiteral::Int(i) => AttrValue::Int(i),
                RawLiteral::Decimal(d) => AttrValue::Decimal(d),
            }),
        };
        mappings.push(Mapping {
            target: m.target,
            source,
        });
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(Rule {
        id: raw.id,
        selection: raw
            .selection
            .into_iter()
            .map(|(var, type_name, _)| SelItem { var, type_name })
            .collect(),
        pattern,
        emit_type,
        mappings,
        prob: raw.prob,
        priority: raw.priority,
    })
}
