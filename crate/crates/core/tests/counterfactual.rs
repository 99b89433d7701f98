mod common;

use common::naive_levenshtein;
use journey_core::counterfactual::{edit_script, explain_batch, find_counterfactual, projections, CfQuery};
use journey_core::distance::Weight;
use journey_core::ingest::parse_query;
use journey_core::model::Symbol;
use journey_core::{Dataset, DistanceConfig, Journey, KnnModel, Outcome, Stage, StageMask, StageWeights};

const LAMBDAS: [f64; 5] = [0.0, 0.1, 1.0, 10.0, 1e9];

fn fixture() -> (Dataset, KnnModel) {
    let (data, _) = journey_core::fixture::survey().unwrap();
    let config = DistanceConfig::levenshtein(StageWeights::integers(2, 1, 10).unwrap());
    let model = KnnModel::fit(&data, 3, config).unwrap();
    (data, model)
}

fn query(items: &[&str]) -> Journey {
    parse_query("base", items).unwrap()
}

/// Independent pass: all candidates scored from projections with the
/// recursive oracle, minimum by (objective, distance, row).
fn second_pass(data: &Dataset, base: &Journey, skip: Option<usize>, y_obj: Outcome, lambda: f64) -> (f64, Weight, usize) {
    let weights = [Weight::from(2), Weight::from(1)];
    let mut best: Option<(f64, Weight, usize)> = None;
    for (j, c) in data.journeys().iter().enumerate() {
        let same = base.steps() == c.steps() && base.label().is_none_or(|l| c.label() == Some(l));
        if skip == Some(j) || same {
            continue;
        }
        let mut d = Weight::from(0);
        for (g, stage) in [Stage::St1, Stage::St2].into_iter().enumerate() {
            let x: Vec<Symbol> = base.stage_symbols(stage);
            let y: Vec<Symbol> = c.stage_symbols(stage);
            d += weights[g] * Weight::from(naive_levenshtein(&x, &y) as u64);
        }
        let loss = if c.label() == Some(y_obj) { 0.0 } else { 1.0 };
        let obj = loss + lambda * (*d.numer() as f64 / *d.denom() as f64);
        let better = match best {
            None => true,
            Some((bo, bd, _)) => obj < bo || (obj == bo && d < bd),
        };
        if better {
            best = Some((obj, d, j));
        }
    }
    best.unwrap()
}

#[test]
fn argmin_agrees_with_second_pass_on_every_row() {
    let (data, model) = fixture();
    for i in 0..data.len() {
        for y_obj in [Outcome::Purchase, Outcome::NonPurchase] {
            for lambda in LAMBDAS {
                let q = CfQuery::for_row(&data, i, y_obj, lambda).unwrap();
                let r = find_counterfactual(&data, &model, &q).unwrap();
                let (obj, d, j) = second_pass(&data, &data.journeys()[i], Some(i), y_obj, lambda);
                assert_eq!((r.index, r.objective), (j, obj), "row {i} y={y_obj:?} λ={lambda}");
                assert_eq!(r.distance, *d.numer() as f64 / *d.denom() as f64);
                assert_eq!(r.objective, r.loss + lambda * r.distance);
                assert_ne!(r.index, i);
            }
        }
    }
}

#[test]
fn distance_never_grows_with_lambda() {
    let (data, model) = fixture();
    for i in 0..data.len() {
        let mut last = f64::INFINITY;
        for lambda in LAMBDAS {
            let q = CfQuery::for_row(&data, i, Outcome::Purchase, lambda).unwrap();
            let r = find_counterfactual(&data, &model, &q).unwrap();
            assert!(r.distance <= last, "row {i} λ={lambda}");
            last = r.distance;
        }
    }
}

#[test]
fn scripts_round_trip_on_all_fixture_pairs() {
    let (data, _) = fixture();
    for a in data.journeys() {
        for b in data.journeys() {
            let script = edit_script(a, b, StageMask::ALL);
            assert_eq!(script.apply(&projections(a)), projections(b));
            for stage in Stage::ALL {
                let expected = naive_levenshtein(&a.stage_symbols(stage), &b.stage_symbols(stage));
                assert_eq!(script.for_stage(stage).count(), expected);
            }
        }
    }
}

#[test]
fn four_documented_cases() {
    let (data, model) = fixture();
    let cases: [(&[&str], &[&str], &str); 4] = [
        (&["c", "c", "e", "g"], &["c", "b", "e", "g"], "replace st1 item 2: c → b"),
        (&["d", "e", "f"], &["c", "e", "f"], "replace st1 item 1: d → c"),
        (&["d", "g", "h"], &["d", "g", "e"], "replace st2 item 3: h → e"),
        (&["b"], &["c"], "replace st1 item 1: b → c"),
    ];
    for (base, expected, narrative) in cases {
        let q = CfQuery::new(query(base), Outcome::Purchase, 1.0);
        let r = find_counterfactual(&data, &model, &q).unwrap();
        let (obj, _, j) = second_pass(&data, &q.base, None, Outcome::Purchase, 1.0);
        assert_eq!((r.index, r.objective), (j, obj));
        let steps: Vec<String> = r.counterfactual.steps().iter().map(|c| c.to_string()).collect();
        assert_eq!(steps, expected, "base {base:?}");
        assert_eq!(r.counterfactual.label(), Some(Outcome::Purchase));
        assert_eq!(r.narrative, vec![narrative.to_string()]);
    }
}

#[test]
fn batch_over_non_purchases() {
    let (data, model) = fixture();
    let results = explain_batch(&data, &model, Outcome::Purchase, 0.1, StageMask::PRE_PURCHASE).unwrap();
    assert_eq!(results.len(), 18);
    assert!(results.windows(2).all(|w| w[0].objective <= w[1].objective));
    assert!(results.iter().all(|r| r.loss == 0.0));
}
