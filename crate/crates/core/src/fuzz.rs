//! Seeded random instances for differential testing against the oracle.
//!
//! An instance has up to six explicit events of types `A { k, n }` and
//! `B { k }`, each with up to three alternatives at one occurrence time, and
//! a chain of up to three rules `C1 -> C2 -> C3` with random priorities and
//! random predicates.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::event::{AttrValue, Eid, EidState, EventInstance};
use crate::oracle::{compare_with_network, OracleError, DEFAULT_WORLD_CAP};
use crate::rules::{parse_rules, validate_ruleset, RuleSet};

const TYPES: &str = "\
explicit type A { k: string, n: int }
explicit type B { k: string }
type C1 { k: string }
type C2 { k: string }
type C3 { k: string }
";

const KEYS: [&str; 2] = ["x", "y"];

#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub rules_src: String,
    pub rules: RuleSet,
    pub events: Vec<Eid>,
}

fn random_rule(rng: &mut ChaCha8Rng, index: usize, priority: i64) -> String {
    let mut vars: Vec<(String, &str)> = Vec::new();
    if index > 1 {
        vars.push(("c".into(), ["C1", "C2"][index - 2]));
    }
    let extra = if index == 1 {
        rng.random_range(1..=2)
    } else {
        rng.random_range(0..=1)
    };
    for i in 0..extra {
        vars.push((
            format!("v{i}"),
            if rng.random_bool(0.5) { "A" } else { "B" },
        ));
    }

    let mut preds = Vec::new();
    for _ in 0..rng.random_range(1..=3) {
        let a = rng.random_range(0..vars.len());
        let b = rng.random_range(0..vars.len());
        let (va, ta) = (&vars[a].0, vars[a].1);
        let (vb, tb) = (&vars[b].0, vars[b].1);
        let pred = match rng.random_range(0..4) {
            0 => {
                let from = rng.random_range(0..6);
                if rng.random_bool(0.3) {
                    format!("{from} <= {va}.occT <= inf")
                } else {
                    format!("{from} <= {va}.occT <= {}", from + rng.random_range(0..6))
                }
            }
            1 if a != b => format!("{va}.occT < {vb}.occT"),
            2 if a != b => format!(
                "{va}.occT <= {vb}.occT <= {va}.occT + {}",
                rng.random_range(1..=5)
            ),
            3 if a != b && ta == "A" && tb == "A" && rng.random_bool(0.5) => {
                format!("{va}.n == {vb}.n")
            }
            _ if a != b => format!("{va}.k == {vb}.k"),
            _ => format!("0 <= {va}.occT <= inf"),
        };
        preds.push(pred);
    }

    let src = rng.random_range(0..vars.len());
    let selection: Vec<String> = vars.iter().map(|(v, t)| format!("{v}: {t}")).collect();
    let prob = rng.random_range(0..=20) as f64 / 20.0;
    format!(
        "rule R{index} priority {priority} prob {prob:?} {{\n  select {};\n  where {};\n  emit C{index} {{ k = {}.k }};\n}}\n",
        selection.join(", "),
        preds.join("\n    and "),
        vars[src].0,
    )
}

fn random_event(rng: &mut ChaCha8Rng, seq: u64) -> Eid {
    let is_a = rng.random_bool(0.5);
    let ty = if is_a { "A" } else { "B" };
    let occ_t = rng.random_range(0..10);
    // Weights in tenths; whatever is left over is the chance of non-occurrence.
    let mut states: Vec<(EidState, u32)> = Vec::new();
    let mut left = 10;
    for _ in 0..rng.random_range(1..=3) {
        let mut attrs = vec![(
            "k".to_string(),
            AttrValue::Str(KEYS[rng.random_range(0..2)].into()),
        )];
        if is_a {
            attrs.push(("n".to_string(), AttrValue::Int(rng.random_range(0..2))));
        }
        let state = EidState::Occurred(EventInstance::new(ty, occ_t, attrs));
        if left == 0 || states.iter().any(|(s, _)| *s == state) {
            continue;
        }
        let w = rng.random_range(1..=left);
        left -= w;
        states.push((state, w));
    }
    // Three alternatives take all the mass so the domain stays at three states.
    if states.len() == 3 {
        states[2].1 += left;
    }
    let states = states
        .into_iter()
        .map(|(s, w)| (s, w as f64 / 10.0))
        .collect();
    Eid::explicit(format!("E{seq}"), ty, seq, states).expect("generated EID is well formed")
}

/// Builds the instance for one seed.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_rules = rng.random_range(1..=3);
    let mut priorities: Vec<i64> = Vec::new();
    while priorities.len() < n_rules {
        let p = rng.random_range(1..=20);
        if !priorities.contains(&p) {
            priorities.push(p);
        }
    }
    let mut rules_src = TYPES.to_string();
    for (i, p) in priorities.iter().enumerate() {
        writeln!(rules_src, "{}", random_rule(&mut rng, i + 1, *p)).unwrap();
    }
    let rules =
        parse_rules(&rules_src).unwrap_or_else(|e| panic!("generated rules: {e:?}\n{rules_src}"));
    debug_assert!(validate_ruleset(&rules).is_ok());
    let events = (1..=rng.random_range(1..=6))
        .map(|seq| random_event(&mut rng, seq))
        .collect();
    Instance {
        seed,
        rules_src,
        rules,
        events,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzFailure {
    pub seed: u64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzSummary {
    pub instances: usize,
    pub passed: usize,
    /// Largest difference seen over every EID of every instance.
    pub max_abs_diff: f64,
    pub failures: Vec<FuzzFailure>,
}

impl FuzzSummary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs `count` instances with seeds `seed, seed + 1, ...` and compares the
/// network against the oracle on each.
pub fn run_suite(count: usize, seed: u64, tol: f64) -> Result<FuzzSummary, OracleError> {
    let mut summary = FuzzSummary {
        instances: count,
        passed: 0,
        max_abs_diff: 0.0,
        failures: Vec::new(),
    };
    for i in 0..count {
        let inst = random_instance(seed.wrapping_add(i as u64));
        let detail = match compare_with_network(&inst.events, &inst.rules, tol, DEFAULT_WORLD_CAP) {
            Ok(cmp) => {
                for e in &cmp.entries {
                    summary.max_abs_diff = summary.max_abs_diff.max(e.max_abs_diff);
                }
                if cmp.pass {
                    summary.passed += 1;
                    continue;
                }
                format!("marginals differ for {}", cmp.failures().join(", "))
            }
            Err(OracleError::TooManyWorlds { cap }) => {
                return Err(OracleError::TooManyWorlds { cap })
            }
            Err(e) => e.to_string(),
        };
        summary.failures.push(FuzzFailure {
            seed: inst.seed,
            detail,
        });
    }
    Ok(summary)
}
