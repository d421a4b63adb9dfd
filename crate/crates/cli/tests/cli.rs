use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn pcep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcep"))
        .args(args)
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn query_selects_types() {
    let (rules, events) = (fixture("escalation.rules"), fixture("escalation.jsonl"));
    let base = ["run", "--rules", &rules, "--events", &events];

    let inferred = json(&pcep(&base));
    let ids: Vec<&str> = inferred["eids"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["E_IllegalTrade", "E_OpenInvestigation"]);

    let all = json(&pcep(&[&base[..], &["--all"]].concat()));
    assert_eq!(all["eids"].as_array().unwrap().len(), 6);
    assert_eq!(all["network"]["edges"], 5);

    let sells = json(&pcep(
        &[
            &base[..],
            &["--query", "StockSell", "--query", "Investigation"],
        ]
        .concat(),
    ));
    let types: Vec<&str> = sells["eids"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["type"].as_str().unwrap())
        .collect();
    assert_eq!(types, ["StockSell", "StockSell", "Investigation"]);

    let unknown = pcep(&[&base[..], &["--query", "Nope"]].concat());
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn chained_marginal() {
    let out = pcep(&[
        "run",
        "--rules",
        &fixture("escalation.rules"),
        "--events",
        &fixture("escalation.jsonl"),
    ]);
    let report = json(&out);
    let marginal = report["eids"][1]["marginal"].as_object().unwrap();
    let occurred: f64 = marginal
        .iter()
        .filter(|(k, _)| k.starts_with("occurred"))
        .map(|(_, v)| v.as_f64().unwrap())
        .sum();
    assert!((occurred - 0.28 * 0.8 * 0.9).abs() < 1e-12);
}

#[test]
fn empty_events_file() {
    let empty = std::env::temp_dir().join(format!("pcep-empty-{}.jsonl", std::process::id()));
    std::fs::write(&empty, "").unwrap();
    let empty = empty.to_string_lossy().into_owned();
    let rules = fixture("trading.rules");
    let report = json(&pcep(&[
        "run", "--rules", &rules, "--events", &empty, "--all",
    ]));
    assert_eq!(report["eids"].as_array().unwrap().len(), 0);
    let dot = pcep(&["export-dot", "--rules", &rules, "--events", &empty]);
    assert_eq!(dot.stdout, b"digraph bayes_network {\n}\n");
    std::fs::remove_file(&empty).unwrap();
}

#[test]
fn error_exit_codes() {
    let rules = fixture("trading.rules");
    let missing = pcep(&[
        "run",
        "--rules",
        &rules,
        "--events",
        "/nonexistent/events.jsonl",
    ]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error: "));

    let cap = pcep(&[
        "oracle",
        "--rules",
        &rules,
        "--events",
        &fixture("many_events.jsonl"),
    ]);
    assert_eq!(cap.status.code(), Some(4));

    let small_cap = pcep(&[
        "oracle",
        "--rules",
        &rules,
        "--events",
        &fixture("trading.jsonl"),
        "--cap",
        "4",
    ]);
    assert_eq!(small_cap.status.code(), Some(4));

    let cyclic = pcep(&[
        "run",
        "--rules",
        &fixture("cyclic.rules"),
        "--events",
        &fixture("trading.jsonl"),
    ]);
    assert_eq!(cyclic.status.code(), Some(2));
}

#[test]
fn oracle_reports_per_eid() {
    let out = pcep(&[
        "oracle",
        "--rules",
        &fixture("escalation.rules"),
        "--events",
        &fixture("escalation.jsonl"),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let cmp = json(&out);
    assert_eq!(cmp["pass"], true);
    assert_eq!(cmp["entries"].as_array().unwrap().len(), 6);
}

#[test]
fn check_reports_counts() {
    let out = pcep(&["check", "--rules", &fixture("escalation.rules")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        "ok: 5 event types, 2 rules\n"
    );
}
