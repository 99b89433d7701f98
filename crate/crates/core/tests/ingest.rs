use std::collections::BTreeMap;

use journey_core::ingest::{cleanse, describe, load, validate, Format, RawRecord, RejectReason};
use journey_core::{ItemCode, Outcome, Stage};
use proptest::prelude::*;

#[test]
fn fixture_cleanses_to_104() {
    let (data, report) = journey_core::fixture::survey().unwrap();
    assert_eq!(report.input, 127);
    assert_eq!(report.accepted, 104);
    assert_eq!(report.rejected.len(), 23);
    let expected: BTreeMap<String, usize> = [
        ("EventAfterOutcome", 4),
        ("IllegalTransition", 4),
        ("NoOutcome", 7),
        ("PostPurchaseItem", 5),
        ("TooLong", 2),
        ("UnknownSymbol", 1),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    assert_eq!(report.histogram, expected);

    let labels = data.labels();
    assert_eq!(labels.iter().filter(|&&l| l == Outcome::Purchase).count(), 86);
    assert_eq!(labels.iter().filter(|&&l| l == Outcome::NonPurchase).count(), 18);

    let stats = describe(&data);
    assert_eq!(stats.journeys, 104);
    assert!(stats.frequencies[&Stage::St3].contains_key(&ItemCode::J));
}

#[test]
fn jsonl_and_csv_agree() {
    let csv = "r1,c,e,g,i\nr2,d,k\n";
    let jsonl = "{\"id\":\"r1\",\"items\":[\"c\",\"e\",\"g\",\"i\"]}\n{\"id\":\"r2\",\"items\":[\"d\",\"k\"],\"label\":0}\n";
    let a = load(csv.as_bytes(), Format::Csv).unwrap();
    let b = load(jsonl.as_bytes(), Format::Jsonl).unwrap();
    assert_eq!(a, b);
}

/// Rule oracle written from the acceptance rules, first violation wins.
fn oracle(items: &[char]) -> Result<(), RejectReason> {
    let stage = |c: char| match c {
        'a'..='d' => Some(1),
        'e'..='h' => Some(2),
        'i'..='k' => Some(3),
        _ => None,
    };
    let mut prev = 0;
    let mut steps = 0;
    for &c in items {
        if !('a'..='m').contains(&c) {
            return Err(RejectReason::UnknownSymbol);
        }
        let Some(s) = stage(c) else {
            return Err(RejectReason::PostPurchaseItem);
        };
        if prev == 3 {
            return Err(RejectReason::EventAfterOutcome);
        }
        if prev == 0 && s != 1 {
            return Err(RejectReason::IllegalTransition);
        }
        if s < 3 {
            steps += 1;
            if steps > 10 {
                return Err(RejectReason::TooLong);
            }
        }
        prev = s;
    }
    if prev == 3 {
        Ok(())
    } else {
        Err(RejectReason::NoOutcome)
    }
}

proptest! {
    #[test]
    fn validation_matches_rule_oracle(items in prop::collection::vec(prop::sample::select("abcdefghijklmz".chars().collect::<Vec<_>>()), 1..14)) {
        let record = RawRecord::new("x", items.iter().map(|c| c.to_string()));
        let got = validate(&record).map(|_| ()).map_err(|r| r.reason);
        prop_assert_eq!(got, oracle(&items));
    }

    #[test]
    fn cleansing_is_idempotent(rows in prop::collection::vec(prop::collection::vec(prop::sample::select("abcdefghijkl".chars().collect::<Vec<_>>()), 1..8), 1..20)) {
        let records: Vec<RawRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| RawRecord::new(format!("r{i}"), r.iter().map(|c| c.to_string())))
            .collect();
        let (first, _) = cleanse(&records, "p");
        if let Ok(data) = first {
            let again: Vec<RawRecord> = data
                .journeys()
                .iter()
                .map(|j| RawRecord::new(j.id(), j.items().map(|c| c.to_string())))
                .collect();
            let (second, report) = cleanse(&again, "p");
            prop_assert_eq!(report.rejected.len(), 0);
            let second = second.unwrap();
            prop_assert_eq!(second.journeys(), data.journeys());
        }
    }
}
