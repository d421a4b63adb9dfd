use std::fmt::Write;

use super::BayesNetwork;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn quote(s: &str) -> String {
    format!("\"{}\"", escape(s))
}

/// Graphviz rendering. Nodes and edges follow history order, so equal
/// networks render to identical text.
pub(super) fn export(net: &BayesNetwork) -> String {
    let nodes = net.nodes();
    let mut out = String::from("digraph bayes_network {\n");
    for node in &nodes {
        let eid = node.eid();
        let occ = eid
            .occ_t()
            .map_or_else(|| "-".to_string(), |t| t.to_string());
        let label = format!(
            "{}\\n{}\\noccT={occ}",
            escape(eid.id()),
            escape(eid.type_name())
        );
        writeln!(out, "  {} [label=\"{label}\"];", quote(eid.id())).unwrap();
    }
    for node in &nodes {
        for parent in node.parents() {
            writeln!(out, "  {} -> {};", quote(parent), quote(node.eid().id())).unwrap();
        }
    }
    out.push_str("}\n");
    out
}
