use std::fmt;

use crate::event::{EidState, PROB_TOLERANCE};

/// A probability distribution over the states of one EID, in domain order.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    entries: Vec<(EidState, f64)>,
}

impl Distribution {
    pub fn new(entries: Vec<(EidState, f64)>) -> Self {
        Distribution { entries }
    }

    /// The point mass on `NotOccurred`.
    pub fn never() -> Self {
        Distribution {
            entries: vec![(EidState::NotOccurred, 1.0)],
        }
    }

    pub fn entries(&self) -> &[(EidState, f64)] {
        &self.entries
    }

    /// Probability of `state`; zero for states outside the domain.
    pub fn prob(&self, state: &EidState) -> f64 {
        self.entries
            .iter()
            .find(|(s, _)| s == state)
            .map_or(0.0, |(_, p)| *p)
    }

    pub fn not_occurred(&self) -> f64 {
        self.prob(&EidState::NotOccurred)
    }

    /// Total mass of all occurred states.
    pub fn occurred(&self) -> f64 {
        self.entries
            .iter()
            .filter(|(s, _)| s.is_occurred())
            .map(|(_, p)| p)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.total() - 1.0).abs() <= PROB_TOLERANCE
    }

    /// Largest absolute difference over the union of both domains.
    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.entries
            .iter()
            .chain(other.entries.iter())
            .map(|(s, _)| (self.prob(s) - other.prob(s)).abs())
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .entries
            .iter()
            .map(|(s, p)| format!("{}: {p}", s.label()))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}
