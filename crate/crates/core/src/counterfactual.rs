//! Counterfactual selection among observed journeys, with edit scripts.
//!
//! A counterfactual for a base journey is the observed journey minimizing
//! `loss(y_obj, y_j) + λ·D′(base, s_j)`, where the loss is 0-1 on the
//! candidate's observed label and `D′` is the stage-weighted distance
//! restricted to a stage mask. Nothing is synthesized.

use std::cmp::Ordering;
use std::fmt;

use num_traits::Zero;
use serde::Serialize;

use crate::distance::{levenshtein_table, to_f64, StageMask, StagedSymbols, Weight};
use crate::error::{Error, Result};
use crate::model::{Dataset, Journey, Outcome, Stage, Symbol};
use crate::prediction::{classify_value, KnnModel, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, PartialEq)]
pub struct CfQuery {
    pub base: Journey,
    /// Dataset row of the base, when it was picked from the dataset.
    pub base_index: Option<usize>,
    pub y_obj: Outcome,
    pub lambda: f64,
    pub mask: StageMask,
}

impl CfQuery {
    /// Query with the prediction mask (stages 1 and 2).
    pub fn new(base: Journey, y_obj: Outcome, lambda: f64) -> Self {
        CfQuery {
            base,
            base_index: None,
            y_obj,
            lambda,
            mask: StageMask::PRE_PURCHASE,
        }
    }

    /// Query for dataset row `index`.
    pub fn for_row(dataset: &Dataset, index: usize, y_obj: Outcome, lambda: f64) -> Result<Self> {
        let base = dataset
            .get(index)
            .ok_or_else(|| Error::InvalidParameter(format!("row {index} out of range")))?
            .clone();
        Ok(CfQuery {
            base_index: Some(index),
            ..CfQuery::new(base, y_obj, lambda)
        })
    }

    pub fn with_mask(mut self, mask: StageMask) -> Self {
        self.mask = mask;
        self
    }

    fn check(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "lambda must be a finite non-negative number, got {}",
                self.lambda
            )));
        }
        if self.mask.is_empty() {
            return Err(Error::InvalidParameter("stage mask is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum EditKind {
    Substitute { from: Symbol, to: Symbol },
    Insert { item: Symbol },
    Delete { item: Symbol },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EditOp {
    pub stage: Stage,
    /// 1-based position in the base journey. For an insertion, the position
    /// the new item will occupy.
    pub position: usize,
    /// 0-based offset into the base's stage projection.
    pub base_offset: usize,
    #[serde(flatten)]
    pub kind: EditKind,
}

impl fmt::Display for EditOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            EditKind::Substitute { from, to } => {
                write!(f, "replace {} item {}: {} → {}", self.stage, self.position, from, to)
            }
            EditKind::Insert { item } => write!(f, "insert {} item {}: {}", self.stage, self.position, item),
            EditKind::Delete { item } => write!(f, "delete {} item {}: {}", self.stage, self.position, item),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EditScript {
    pub ops: Vec<EditOp>,
}

impl EditScript {
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn for_stage(&self, stage: Stage) -> impl Iterator<Item = &EditOp> {
        self.ops.iter().filter(move |op| op.stage == stage)
    }

    /// Applies the script to stage projections, indexed by stage.
    pub fn apply(&self, projections: &[Vec<Symbol>; 3]) -> [Vec<Symbol>; 3] {
        let mut out = projections.clone();
        // offsets refer to the unedited base, so apply back to front
        for op in self.ops.iter().rev() {
            let seq = &mut out[op.stage.index()];
            match op.kind {
                EditKind::Substitute { to, .. } => seq[op.base_offset] = to,
                EditKind::Insert { item } => seq.insert(op.base_offset, item),
                EditKind::Delete { .. } => {
                    seq.remove(op.base_offset);
                }
            }
        }
        out
    }

    pub fn narrative(&self) -> Vec<String> {
        self.ops.iter().map(ToString::to_string).collect()
    }
}

/// Stage projections of a journey, indexed by stage.
pub fn projections(journey: &Journey) -> [Vec<Symbol>; 3] {
    Stage::ALL.map(|s| journey.stage_symbols(s))
}

fn stage_script(base: &Journey, cf: &Journey, stage: Stage, ops: &mut Vec<EditOp>) {
    let x = base.stage_symbols(stage);
    let y = cf.stage_symbols(stage);
    let positions = base.stage_positions(stage);
    let insert_position = |offset: usize| match positions.get(offset) {
        Some(&p) => p,
        None => positions.last().map_or(base.steps().len() + 1, |&p| p + 1),
    };
    let table = levenshtein_table(&x, &y);
    let (mut i, mut j) = (x.len(), y.len());
    let mut rev = Vec::new();
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && table[i][j] == table[i - 1][j - 1] + usize::from(x[i - 1] != y[j - 1]) {
            if x[i - 1] != y[j - 1] {
                rev.push(EditOp {
                    stage,
                    position: positions[i - 1],
                    base_offset: i - 1,
                    kind: EditKind::Substitute {
                        from: x[i - 1],
                        to: y[j - 1],
                    },
                });
            }
            i -= 1;
            j -= 1;
        } else if i > 0 && table[i][j] == table[i - 1][j] + 1 {
            rev.push(EditOp {
                stage,
                position: positions[i - 1],
                base_offset: i - 1,
                kind: EditKind::Delete { item: x[i - 1] },
            });
            i -= 1;
        } else {
            rev.push(EditOp {
                stage,
                position: insert_position(i),
                base_offset: i,
                kind: EditKind::Insert { item: y[j - 1] },
            });
            j -= 1;
        }
    }
    ops.extend(rev.into_iter().rev());
}

/// Minimal unit-cost alignment per masked stage, backtracked with preference
/// substitute/match over delete over insert.
pub fn edit_script(base: &Journey, cf: &Journey, mask: StageMask) -> EditScript {
    let mut ops = Vec::new();
    for stage in mask.stages() {
        stage_script(base, cf, stage, &mut ops);
    }
    EditScript { ops }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CfResult {
    pub base: Journey,
    pub base_index: Option<usize>,
    pub counterfactual: Journey,
    /// Dataset row of the counterfactual.
    pub index: usize,
    pub y_obj: Outcome,
    pub lambda: f64,
    pub mask: StageMask,
    pub objective: f64,
    pub distance: f64,
    pub loss: f64,
    /// k-NN prediction for the counterfactual.
    pub model_check: f64,
    pub edits: EditScript,
    pub narrative: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// A base without an outcome matches any journey with the same steps.
pub fn is_same_journey(base: &Journey, candidate: &Journey) -> bool {
    base.steps() == candidate.steps() && (base.label().is_none() || base.label() == candidate.label())
}

fn zero_one(y_obj: Outcome, y: Outcome) -> f64 {
    if y_obj == y {
        0.0
    } else {
        1.0
    }
}

/// Brute-force argmin over every dataset journey except the base. Ties go to
/// the smaller distance, then the lower row.
pub fn find_counterfactual(dataset: &Dataset, model: &KnnModel, query: &CfQuery) -> Result<CfResult> {
    query.check()?;
    let weights = model.config().weights.masked(query.mask);
    if weights.iter().all(Zero::is_zero) {
        return Err(Error::DegenerateConfig);
    }
    let kernel = model.config().kernel;
    let base = StagedSymbols::of(&query.base);

    let mut best: Option<(f64, Weight, usize, f64)> = None;
    for (j, candidate) in dataset.journeys().iter().enumerate() {
        if query.base_index == Some(j) || is_same_journey(&query.base, candidate) {
            continue;
        }
        let loss = zero_one(query.y_obj, candidate.outcome_label()?);
        let d = base.distance(&StagedSymbols::of(candidate), &weights, kernel);
        let objective = loss + query.lambda * to_f64(d);
        let better = match &best {
            None => true,
            Some((bo, bd, _, _)) => match objective.total_cmp(bo) {
                Ordering::Less => true,
                Ordering::Equal => d < *bd,
                Ordering::Greater => false,
            },
        };
        if better {
            best = Some((objective, d, j, loss));
        }
    }
    let (objective, d, index, loss) = best.ok_or(Error::NoCandidates)?;
    let counterfactual = dataset.journeys()[index].clone();
    let model_check = model.predict_value(&counterfactual);
    let edits = edit_script(&query.base, &counterfactual, query.mask);
    let mut warnings = Vec::new();
    if query.base.label() == Some(query.y_obj) {
        warnings.push(format!("base journey already has outcome {}", query.y_obj.bit()));
    }
    if loss > 0.0 {
        warnings.push(format!(
            "the selected journey does not have outcome {}; distance outweighed the loss",
            query.y_obj.bit()
        ));
    } else if classify_value(model_check, DEFAULT_THRESHOLD) != query.y_obj {
        warnings.push(format!(
            "model prediction {model_check:.3} for the counterfactual does not match outcome {}",
            query.y_obj.bit()
        ));
    }
    let warning = (!warnings.is_empty()).then(|| warnings.join("; "));
    Ok(CfResult {
        base: query.base.clone(),
        base_index: query.base_index,
        counterfactual,
        index,
        y_obj: query.y_obj,
        lambda: query.lambda,
        mask: query.mask,
        objective,
        distance: to_f64(d),
        loss,
        model_check,
        narrative: edits.narrative(),
        edits,
        warning,
    })
}

/// Explains every journey whose observed label differs from `y_obj`,
/// sorted by objective (then base row).
pub fn explain_batch(
    dataset: &Dataset,
    model: &KnnModel,
    y_obj: Outcome,
    lambda: f64,
    mask: StageMask,
) -> Result<Vec<CfResult>> {
    let mut results = Vec::new();
    for (i, journey) in dataset.journeys().iter().enumerate() {
        if journey.outcome_label()? == y_obj {
            continue;
        }
        let query = CfQuery::for_row(dataset, i, y_obj, lambda)?.with_mask(mask);
        match find_counterfactual(dataset, model, &query) {
            Ok(r) => results.push(r),
            Err(Error::NoCandidates) => {}
            Err(e) => return Err(e),
        }
    }
    results.sort_by(|a, b| a.objective.total_cmp(&b.objective).then(a.base_index.cmp(&b.base_index)));
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::{DistanceConfig, StageWeights};
    use crate::ingest::{cleanse, parse_query, RawRecord};
    use crate::model::ItemCode;

    fn ds(items: &[&str]) -> Dataset {
        let records: Vec<RawRecord> = items
            .iter()
            .enumerate()
            .map(|(i, s)| RawRecord::new(format!("r{i}"), s.chars().map(|c| c.to_string())))
            .collect();
        cleanse(&records, "t").0.unwrap()
    }

    fn journey(items: &str) -> Journey {
        let symbols: Vec<String> = items.chars().map(|c| c.to_string()).collect();
        parse_query("q", &symbols).unwrap()
    }

    fn model(data: &Dataset, w1: u64, w2: u64) -> KnnModel {
        let config = DistanceConfig::levenshtein(StageWeights::integers(w1, w2, 1).unwrap());
        KnnModel::fit(data, 1, config).unwrap()
    }

    fn sym(c: char) -> Symbol {
        Symbol::Item(ItemCode::from_char(c).unwrap())
    }

    #[test]
    fn two_candidate_example() {
        let data = ds(&["cbegi", "dgi"]);
        let m = model(&data, 2, 1);
        let r = find_counterfactual(&data, &m, &CfQuery::new(journey("ccegk"), Outcome::Purchase, 1.0)).unwrap();
        assert_eq!(r.index, 0);
        assert_eq!((r.loss, r.distance, r.objective), (0.0, 2.0, 2.0));
        assert_eq!(r.narrative, vec!["replace st1 item 2: c → b"]);
        assert_eq!(
            r.edits.ops,
            vec![EditOp {
                stage: Stage::St1,
                position: 2,
                base_offset: 1,
                kind: EditKind::Substitute {
                    from: sym('c'),
                    to: sym('b')
                }
            }]
        );
        assert!(r.warning.is_none());
    }

    #[test]
    fn lambda_extremes() {
        let data = ds(&["afhi", "cfi", "cegk"]);
        let m = model(&data, 1, 1);
        let base = journey("cegk");
        let zero = find_counterfactual(&data, &m, &CfQuery::new(base.clone(), Outcome::Purchase, 0.0)).unwrap();
        // both purchase rows cost 0; cfi is nearer
        assert_eq!(zero.index, 1);
        let data = ds(&["afhi", "cfi", "cegk", "ceghk"]);
        let m = model(&data, 1, 1);
        let huge = find_counterfactual(&data, &m, &CfQuery::new(base, Outcome::Purchase, 1e9)).unwrap();
        assert_eq!(huge.index, 3);
        assert_eq!(huge.loss, 1.0);
        assert!(huge.warning.is_some());
    }

    #[test]
    fn base_row_is_never_returned() {
        let data = ds(&["cei", "cek", "dgk"]);
        let m = model(&data, 2, 1);
        let q = CfQuery::for_row(&data, 1, Outcome::NonPurchase, 0.1).unwrap();
        let r = find_counterfactual(&data, &m, &q).unwrap();
        assert_eq!(r.index, 2);
    }

    #[test]
    fn no_candidates() {
        let data = ds(&["cei"]);
        let m = model(&data, 1, 1);
        let q = CfQuery::for_row(&data, 0, Outcome::Purchase, 1.0).unwrap();
        assert_eq!(find_counterfactual(&data, &m, &q).unwrap_err(), Error::NoCandidates);
    }

    #[test]
    fn bad_queries() {
        let data = ds(&["cei", "dk"]);
        let m = model(&data, 1, 1);
        let q = CfQuery::new(journey("ci"), Outcome::Purchase, -1.0);
        assert!(matches!(find_counterfactual(&data, &m, &q), Err(Error::InvalidParameter(_))));
        let q = CfQuery::new(journey("ci"), Outcome::Purchase, 1.0).with_mask(StageMask::NONE);
        assert!(matches!(find_counterfactual(&data, &m, &q), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn scripts_by_hand() {
        let s = edit_script(&journey("dghk"), &journey("dgek"), StageMask::PRE_PURCHASE);
        assert_eq!(s.narrative(), vec!["replace st2 item 3: h → e"]);
        assert!(edit_script(&journey("cegi"), &journey("cegi"), StageMask::ALL).is_empty());
        let s = edit_script(&journey("cegk"), &journey("cgi"), StageMask::ALL);
        assert_eq!(
            s.narrative(),
            vec!["delete st2 item 2: e", "replace st3 item 4: 0 → 1"]
        );
        let s = edit_script(&journey("ci"), &journey("cgei"), StageMask::PRE_PURCHASE);
        assert_eq!(s.narrative(), vec!["insert st2 item 2: g", "insert st2 item 2: e"]);
    }

    #[test]
    fn script_applies() {
        let pairs = [("cbegi", "dgfk"), ("ci", "bcghei"), ("dchgk", "cgi"), ("aehk", "bi")];
        for (a, b) in pairs {
            let (a, b) = (journey(a), journey(b));
            let s = edit_script(&a, &b, StageMask::ALL);
            assert_eq!(s.apply(&projections(&a)), projections(&b));
        }
    }

    #[test]
    fn batch_covers_other_label() {
        let data = ds(&["cei", "cek", "dgk", "cgi", "ak"]);
        let m = model(&data, 2, 1);
        let all = explain_batch(&data, &m, Outcome::Purchase, 0.1, StageMask::PRE_PURCHASE).unwrap();
        assert_eq!(all.len(), 3);
        assert!(all.windows(2).all(|w| w[0].objective <= w[1].objective));
        assert!(all.iter().all(|r| r.counterfactual.label() == Some(Outcome::Purchase)));
        let none = explain_batch(&ds(&["cei", "dgi"]), &m, Outcome::Purchase, 1.0, StageMask::ALL).unwrap();
        assert!(none.is_empty());
    }
}
