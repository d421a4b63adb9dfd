//! Scenario builders for the benchmarks.

use pcep_core::event::{AttrValue, Eid, EidState, EventInstance};
use pcep_core::rules::{parse_rules, RuleSet};

pub const TRADING_RULES: &str = "
explicit type StockSell { stockTicker: string, customerID: string }
explicit type StockPurchase { stockTicker: string, customerID: string }
explicit type ComplianceAlert { customerID: string }
type IllegalStockTrading { stockTicker: string, customerID: string }
type Investigation { customerID: string }

rule IllegalTrade priority 10 prob 0.7 {
  select e1: StockSell, e2: StockPurchase;
  where e1.occT <= e2.occT <= e1.occT + 5
    and e1.stockTicker == e2.stockTicker
    and e1.customerID == e2.customerID;
  emit IllegalStockTrading { stockTicker = e1.stockTicker, customerID = e1.customerID };
}

rule OpenInvestigation priority 5 prob 0.9 {
  select t: IllegalStockTrading, a: ComplianceAlert;
  where t.customerID == a.customerID;
  emit Investigation { customerID = a.customerID };
}
";

pub fn trading_rules() -> RuleSet {
    parse_rules(TRADING_RULES).expect("benchmark rules parse")
}

/// `n` alternating sells and purchases one tick apart, each with two
/// possible tickers, followed by one compliance alert.
pub fn trading_events(n: usize) -> Vec<Eid> {
    let mut eids = Vec::with_capacity(n + 1);
    for i in 0..n {
        let ty = if i % 2 == 0 {
            "StockSell"
        } else {
            "StockPurchase"
        };
        let t = i as u64;
        let state = |ticker: &str| {
            EidState::Occurred(EventInstance::new(
                ty,
                t,
                [
                    ("stockTicker".to_string(), AttrValue::Str(ticker.into())),
                    ("customerID".to_string(), AttrValue::Str("C1".into())),
                ],
            ))
        };
        let seq = i as u64 + 1;
        eids.push(
            Eid::explicit(
                format!("E{seq}"),
                ty,
                seq,
                vec![(state("IBM"), 0.5), (state("MSFT"), 0.3)],
            )
            .expect("benchmark EID"),
        );
    }
    let seq = n as u64 + 1;
    let alert = EventInstance::new(
        "ComplianceAlert",
        n as u64,
        [("customerID".to_string(), AttrValue::Str("C1".into()))],
    );
    eids.push(
        Eid::explicit(
            format!("E{seq}"),
            "ComplianceAlert",
            seq,
            vec![(EidState::Occurred(alert), 0.9)],
        )
        .expect("benchmark EID"),
    );
    eids
}

#[cfg(test)]
mod tests {
    use super::*;
    use pcep_core::oracle::{compare_with_network, DEFAULT_WORLD_CAP};

    #[test]
    fn scenario_is_consistent() {
        let cmp = compare_with_network(
            &trading_events(6),
            &trading_rules(),
            1e-9,
            DEFAULT_WORLD_CAP,
        )
        .unwrap();
        assert!(cmp.pass);
    }
}
