//! Variable elimination with a min-fill ordering.

use std::collections::{BTreeMap, BTreeSet};

use super::BayesNetwork;
use crate::assign::{self, Odometer};
use crate::distribution::Distribution;

/// A table over a set of variables, values in row-major order of `vars`
/// (last variable fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    pub fn new(vars: Vec<usize>, cards: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(vars.len(), cards.len());
        assert_eq!(assign::product(&cards), values.len());
        Factor {
            vars,
            cards,
            values,
        }
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn card_of(&self, var: usize) -> Option<usize> {
        self.vars
            .iter()
            .position(|&v| v == var)
            .map(|i| self.cards[i])
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        for (&v, &c) in other.vars.iter().zip(&other.cards) {
            if !vars.contains(&v) {
                vars.push(v);
                cards.push(c);
            }
        }
        let pick = |f: &Factor| -> Vec<usize> {
            f.vars
                .iter()
                .map(|v| vars.iter().position(|w| w == v).unwrap())
                .collect()
        };
        let (ours, theirs) = (pick(self), pick(other));
        let mut values = Vec::with_capacity(assign::product(&cards));
        let mut odo = Odometer::new(&cards);
        let mut a = Vec::new();
        let mut b = Vec::new();
        while let Some(digits) = odo.next() {
            a.clear();
            a.extend(ours.iter().map(|&i| digits[i]));
            b.clear();
            b.extend(theirs.iter().map(|&i| digits[i]));
            values.push(
                self.values[assign::index_of(&self.cards, &a)]
                    * other.values[assign::index_of(&other.cards, &b)],
            );
        }
        Factor {
            vars,
            cards,
            values,
        }
    }

    pub fn sum_out(&self, var: usize) -> Factor {
        let Some(at) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(at);
        cards.remove(at);
        let mut values = vec![0.0; assign::product(&cards)];
        let mut odo = Odometer::new(&self.cards);
        let mut rest = Vec::new();
        let mut i = 0;
        while let Some(digits) = odo.next() {
            rest.clear();
            rest.extend(
                digits
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != at)
                    .map(|(_, d)| *d),
            );
            values[assign::index_of(&cards, &rest)] += self.values[i];
            i += 1;
        }
        Factor {
            vars,
            cards,
            values,
        }
    }
}

fn ancestors(net: &BayesNetwork, at: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![at];
    while let Some(n) = stack.pop() {
        if seen.insert(n) {
            stack.extend(net.nodes[n].parents.iter().map(|p| net.position(p)));
        }
    }
    seen
}

fn node_factor(net: &BayesNetwork, n: usize) -> Factor {
    let node = &net.nodes[n];
    let mut vars: Vec<usize> = node.parents.iter().map(|p| net.position(p)).collect();
    vars.push(n);
    let mut cards = node.cpt.parent_cards.clone();
    cards.push(node.eid.domain().len());
    let values = node.cpt.rows.iter().flatten().copied().collect();
    Factor::new(vars, cards, values)
}

/// Next variable to eliminate: fewest fill-in edges, ties by node id.
fn pick_min_fill(
    net: &BayesNetwork,
    adj: &BTreeMap<usize, BTreeSet<usize>>,
    remaining: &BTreeSet<usize>,
) -> usize {
    let fill = |v: usize| {
        let nbrs: Vec<usize> = adj[&v].iter().copied().collect();
        let mut missing = 0;
        for (i, a) in nbrs.iter().enumerate() {
            for b in &nbrs[i + 1..] {
                if !adj[a].contains(b) {
                    missing += 1;
                }
            }
        }
        missing
    };
    *remaining
        .iter()
        .min_by(|&&x, &&y| {
            fill(x)
                .cmp(&fill(y))
                .then_with(|| net.nodes[x].eid.id().cmp(net.nodes[y].eid.id()))
        })
        .expect("remaining is non-empty")
}

pub(super) fn marginal(net: &BayesNetwork, query: usize) -> Distribution {
    let scope = ancestors(net, query);
    let mut factors: Vec<Factor> = scope.iter().map(|&n| node_factor(net, n)).collect();

    // Moral graph over the relevant ancestors.
    let mut adj: BTreeMap<usize, BTreeSet<usize>> =
        scope.iter().map(|&n| (n, BTreeSet::new())).collect();
    for f in &factors {
        for &a in &f.vars {
            for &b in &f.vars {
                if a != b {
                    adj.get_mut(&a).unwrap().insert(b);
                }
            }
        }
    }

    let mut remaining: BTreeSet<usize> = scope.iter().copied().filter(|&n| n != query).collect();
    while !remaining.is_empty() {
        let var = pick_min_fill(net, &adj, &remaining);
        remaining.remove(&var);

        let nbrs: Vec<usize> = adj.remove(&var).unwrap().into_iter().collect();
        for &a in &nbrs {
            let set = adj.get_mut(&a).unwrap();
            set.remove(&var);
            set.extend(nbrs.iter().copied().filter(|&b| b != a));
        }

        let (touching, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.card_of(var).is_some());
        factors = rest;
        let joined = touching
            .iter()
            .skip(1)
            .fold(touching[0].clone(), |acc, f| acc.product(f));
        factors.push(joined.sum_out(var));
    }

    let result = factors
        .iter()
        .skip(1)
        .fold(factors[0].clone(), |acc, f| acc.product(f));
    debug_assert_eq!(result.vars, vec![query]);
    let domain = net.nodes[query].eid.domain();
    Distribution::new(domain.iter().cloned().zip(result.values).collect())
}
