use std::collections::BTreeSet;

use pcep_core::distribution::Distribution;
use pcep_core::event::{AttrValue, Eid, EidState, EventHistory, EventInstance};
use pcep_core::fuzz::random_instance;
use pcep_core::network::BayesNetwork;
use pcep_core::oracle::{
    compare_with_network, enumerate_worlds, mass_conserved, DEFAULT_WORLD_CAP,
};
use pcep_core::rules::{parse_rules, validate_ruleset, ValidationError};
use proptest::prelude::*;

/// Whether some type reaches itself, by repeated squaring of reachability.
fn has_cycle(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut reach = vec![vec![false; n]; n];
    for &(a, b) in edges {
        reach[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    (0..n).any(|i| reach[i][i])
}

fn single(seq: u64, t: u64) -> Eid {
    let inst = EventInstance::new("T", t, [("k".to_string(), AttrValue::Int(seq as i64))]);
    Eid::explicit(
        format!("E{seq}"),
        "T",
        seq,
        vec![(EidState::Occurred(inst), 0.5)],
    )
    .unwrap()
}

fn build(inst: &pcep_core::fuzz::Instance) -> BayesNetwork {
    let mut events = inst.events.clone();
    events.sort_by_key(Eid::history_key);
    let mut net = BayesNetwork::new();
    for e in events {
        net.on_event_arrival(e, &inst.rules).unwrap();
    }
    net
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cycle_detection_matches_transitive_closure(
        n in 2usize..=10,
        raw in prop::collection::vec((0usize..10, prop::collection::vec(0usize..10, 1..3)), 1..10),
    ) {
        // Rule i emits type T{i} and selects the listed types.
        let rules: Vec<(usize, Vec<usize>)> = raw
            .into_iter()
            .take(n)
            .enumerate()
            .map(|(i, (_, sel))| (i, sel.into_iter().map(|t| t % n).collect()))
            .collect();
        let mut src = String::new();
        for t in 0..n {
            src.push_str(&format!("type T{t} {{ k: int }}\n"));
        }
        let mut edges = Vec::new();
        for (i, sel) in &rules {
            let vars: Vec<String> = sel.iter().enumerate().map(|(j, t)| format!("v{j}: T{t}")).collect();
            src.push_str(&format!(
                "rule R{i} priority {i} prob 0.5 {{ select {}; where 0 <= v0.occT <= inf; emit T{i} {{ k = v0.k }}; }}\n",
                vars.join(", ")
            ));
            edges.extend(sel.iter().map(|&t| (t, *i)));
        }
        let rs = parse_rules(&src).unwrap();
        let reported = match validate_ruleset(&rs) {
            Ok(()) => false,
            Err(errs) => errs.iter().any(|e| matches!(e, ValidationError::CycleDetected { .. })),
        };
        prop_assert_eq!(reported, has_cycle(n, &edges));
    }

    #[test]
    fn printing_is_a_fixed_point(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let printed = inst.rules.to_string();
        let reparsed = parse_rules(&printed).unwrap();
        prop_assert_eq!(&reparsed, &inst.rules);
        prop_assert_eq!(reparsed.to_string(), printed);
    }

    #[test]
    fn network_matches_worlds(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let cmp = compare_with_network(&inst.events, &inst.rules, 1e-9, DEFAULT_WORLD_CAP).unwrap();
        prop_assert!(cmp.pass, "seed {}: {:?}", seed, cmp);
    }

    #[test]
    fn arrival_order_does_not_matter(seed in any::<u64>(), rotate in 0usize..6) {
        let inst = random_instance(seed);
        let sorted = build(&inst);
        let mut events = inst.events.clone();
        let k = rotate % events.len();
        events.rotate_left(k);
        let mut net = BayesNetwork::new();
        for e in events {
            net.on_event_arrival(e, &inst.rules).unwrap();
        }
        // A node created only under one order never occurs.
        let marginal = |n: &BayesNetwork, id: &str| {
            n.node(id).map_or_else(Distribution::never, |_| n.marginal(id).unwrap())
        };
        let ids: BTreeSet<String> = sorted
            .nodes()
            .into_iter()
            .chain(net.nodes())
            .map(|n| n.eid().id().to_string())
            .collect();
        for id in &ids {
            let d = marginal(&sorted, id).max_abs_diff(&marginal(&net, id));
            prop_assert!(d <= 1e-12, "{}: {}", id, d);
        }
    }

    #[test]
    fn world_mass_is_conserved(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let ws = enumerate_worlds(&inst.events, &inst.rules, DEFAULT_WORLD_CAP).unwrap();
        prop_assert!(mass_conserved(&ws), "{:?}", ws.stage_masses);
    }

    #[test]
    fn cpt_rows_and_marginals_are_normalized(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let net = build(&inst);
        prop_assert!(net.check_invariants().is_ok());
        for node in net.nodes() {
            for row in node.cpt().rows() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
            prop_assert!(net.marginal(node.eid().id()).unwrap().is_normalized());
        }
    }

    #[test]
    fn subset_probability_is_additive(seed in any::<u64>(), split in any::<u32>()) {
        let inst = random_instance(seed);
        for eid in &inst.events {
            let domain = eid.domain();
            let (a, b): (Vec<_>, Vec<_>) = domain
                .iter()
                .cloned()
                .enumerate()
                .partition(|(i, _)| split >> (i % 32) & 1 == 1);
            let a: Vec<EidState> = a.into_iter().map(|(_, s)| s).collect();
            let b: Vec<EidState> = b.into_iter().map(|(_, s)| s).collect();
            let whole = eid.prob_of_subset(domain).unwrap();
            let parts = eid.prob_of_subset(&a).unwrap() + eid.prob_of_subset(&b).unwrap();
            prop_assert!((whole - parts).abs() <= 1e-12);
            prop_assert!((whole - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn windows_compose(
        times in prop::collection::vec(0u64..50, 0..12),
        a in 0u64..50, b in 0u64..50, c in 0u64..50, d in 0u64..50,
    ) {
        let (a, b) = (a.min(b), a.max(b));
        let (c, d) = (c.min(d), c.max(d));
        let h = EventHistory::new(times.iter().enumerate().map(|(i, &t)| single(i as u64, t)).collect()).unwrap();
        prop_assert_eq!(h.window(0, u64::MAX).unwrap(), h.clone());
        if a.max(c) <= b.min(d) {
            let nested = h.window(a, b).unwrap().window(c, d).unwrap();
            prop_assert_eq!(nested, h.window(a.max(c), b.min(d)).unwrap());
        }
    }

    #[test]
    fn history_order_is_strict(times in prop::collection::vec(0u64..5, 1..12)) {
        let h = EventHistory::new(times.iter().enumerate().map(|(i, &t)| single(i as u64, t)).collect()).unwrap();
        let keys: Vec<_> = h.eids().iter().map(Eid::history_key).collect();
        prop_assert!(keys.windows(2).all(|w| w[0] < w[1]));
        let unique: BTreeSet<_> = keys.iter().collect();
        prop_assert_eq!(unique.len(), keys.len());
    }
}
