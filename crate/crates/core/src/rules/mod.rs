//! Rule language: abstract syntax, the rule-file parser, and static checks.
//!
//! A rule file declares event types and rules:
//!
//! ```text
//! explicit type StockSell { stockTicker: string, customerID: string }
//! explicit type StockPurchase { stockTicker: string, customerID: string }
//! type IllegalStockTrading { stockTicker: string, customerID: string }
//!
//! rule IllegalTrade priority 10 prob 0.7 {
//!   select e1: StockSell, e2: StockPurchase;
//!   where e1.occT <= e2.occT <= e1.occT + 5
//!     and e1.stockTicker == e2.stockTicker
//!     and e1.customerID == e2.customerID;
//!   emit IllegalStockTrading { stockTicker = e1.stockTicker, customerID = e1.customerID };
//! }
//! ```

use std::fmt;

mod ast;
mod lexer;
mod parser;
mod validate;

pub use ast::{Mapping, MappingSource, Predicate, Rule, RuleSet, SelItem, TimeBound};
pub use lexer::Pos;
pub use parser::parse_rules;
pub use validate::{dependency_order, rule_eval_order, validate_ruleset, ValidationError};

#[cfg(test)]
pub(crate) use validate::{find_cycles, type_graph};

/// A positioned syntax or name-resolution error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
    pub expected: Option<String>,
}

impl ParseError {
    pub(crate) fn new(pos: Pos, message: impl Into<String>, expected: Option<String>) -> Self {
        ParseError {
            line: pos.line,
            col: pos.col,
            message: message.into(),
            expected,
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)?;
        if let Some(expected) = &self.expected {
            write!(f, " (expected {expected})")?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}
