//! Loading raw survey records, cleansing them into a [`Dataset`], and
//! descriptive statistics.
//!
//! Two input formats are supported, both UTF-8:
//!
//! * CSV without header, one journey per row: `id,item1,item2,...`
//! * JSONL, one object per line: `{"id": "r01", "items": ["c", "e", "g", "i"]}`.
//!   A `label` field is accepted and ignored; labels derive from items.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, ItemCode, Journey, Outcome, Stage, Symbol, MAX_STEPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" | "ndjson" => Ok(Format::Jsonl),
            other => Err(Error::InvalidParameter(format!("unknown format {other:?}"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        })
    }
}

/// Pre-validation record: an id and raw item symbols.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub items: Vec<String>,
}

impl RawRecord {
    pub fn new<S: Into<String>>(id: impl Into<String>, items: impl IntoIterator<Item = S>) -> Self {
        RawRecord {
            id: id.into(),
            items: items.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    id: String,
    items: Vec<String>,
    #[serde(default, rename = "label")]
    _label: Option<serde_json::Value>,
}

/// Reads raw records in input order. Stops at the first structural error.
/// Blank lines are skipped. Symbol legality is not checked here.
pub fn load<R: Read>(source: R, format: Format) -> Result<Vec<RawRecord>> {
    match format {
        Format::Csv => load_csv(source),
        Format::Jsonl => load_jsonl(source),
    }
}

fn load_csv<R: Read>(source: R) -> Result<Vec<RawRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut records = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row_no = idx + 1;
        let row = row.map_err(|e| Error::MalformedRow {
            row: row_no,
            cause: e.to_string(),
        })?;
        let mut fields = row.iter();
        let id = fields.next().unwrap_or_default();
        if id.is_empty() {
            // The csv reader reports a blank line as a single empty field.
            if row.len() == 1 {
                continue;
            }
            return Err(Error::MalformedRow {
                row: row_no,
                cause: "empty id".into(),
            });
        }
        let items: Vec<String> = fields.map(str::to_string).collect();
        if items.is_empty() {
            return Err(Error::MalformedRow {
                row: row_no,
                cause: "no items".into(),
            });
        }
        records.push(RawRecord {
            id: id.to_string(),
            items,
        });
    }
    Ok(records)
}

fn load_jsonl<R: Read>(source: R) -> Result<Vec<RawRecord>> {
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(source).lines().enumerate() {
        let row_no = idx + 1;
        let line = line.map_err(|e| Error::MalformedRow {
            row: row_no,
            cause: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedRow {
            row: row_no,
            cause: e.to_string(),
        })?;
        if rec.items.is_empty() {
            return Err(Error::MalformedRow {
                row: row_no,
                cause: "no items".into(),
            });
        }
        records.push(RawRecord {
            id: rec.id,
            items: rec.items,
        });
    }
    Ok(records)
}

/// Why a record was dropped during cleansing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    UnknownSymbol,
    NoOutcome,
    EventAfterOutcome,
    IllegalTransition,
    PostPurchaseItem,
    TooLong,
}

impl RejectReason {
    pub const ALL: [RejectReason; 6] = [
        RejectReason::UnknownSymbol,
        RejectReason::NoOutcome,
        RejectReason::EventAfterOutcome,
        RejectReason::IllegalTransition,
        RejectReason::PostPurchaseItem,
        RejectReason::TooLong,
    ];

    pub fn code(self) -> &'static str {
        match self {
            RejectReason::UnknownSymbol => "UnknownSymbol",
            RejectReason::NoOutcome => "NoOutcome",
            RejectReason::EventAfterOutcome => "EventAfterOutcome",
            RejectReason::IllegalTransition => "IllegalTransition",
            RejectReason::PostPurchaseItem => "PostPurchaseItem",
            RejectReason::TooLong => "TooLong",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// A rejected record: the first violated rule and the 1-based position of
/// the offending item, when there is one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: String,
    pub reason: RejectReason,
    pub position: Option<usize>,
}

/// Whether an event of stage `to` may follow `from` (`None` = journey start).
///
/// Journeys start with awareness; stages 1 and 2 may follow each other in
/// any order; the outcome is terminal.
pub fn is_legal_transition(from: Option<Stage>, to: Stage) -> bool {
    match from {
        None => to == Stage::St1,
        Some(Stage::St1) | Some(Stage::St2) => true,
        Some(Stage::St3) => false,
    }
}

/// Items that may legally follow a (possibly empty) prefix of stages.
pub fn allowed_next(last: Option<Stage>) -> Vec<ItemCode> {
    ItemCode::ALL
        .iter()
        .copied()
        .filter(|item| {
            item.stage()
                .is_some_and(|stage| is_legal_transition(last, stage))
        })
        .collect()
}

struct Checked {
    steps: Vec<ItemCode>,
    outcome: Option<ItemCode>,
}

fn check<S: AsRef<str>>(
    symbols: &[S],
    parse: impl Fn(&str) -> Option<ItemCode>,
    require_outcome: bool,
) -> std::result::Result<Checked, (RejectReason, Option<usize>)> {
    let mut steps = Vec::new();
    let mut outcome = None;
    let mut prev: Option<Stage> = None;
    for (idx, raw) in symbols.iter().enumerate() {
        let pos = Some(idx + 1);
        let item = parse(raw.as_ref()).ok_or((RejectReason::UnknownSymbol, pos))?;
        let stage = item.stage().ok_or((RejectReason::PostPurchaseItem, pos))?;
        if prev == Some(Stage::St3) {
            return Err((RejectReason::EventAfterOutcome, pos));
        }
        if !is_legal_transition(prev, stage) {
            return Err((RejectReason::IllegalTransition, pos));
        }
        if stage == Stage::St3 {
            outcome = Some(item);
        } else {
            if steps.len() == MAX_STEPS {
                return Err((RejectReason::TooLong, pos));
            }
            steps.push(item);
        }
        prev = Some(stage);
    }
    if require_outcome && outcome.is_none() {
        return Err((RejectReason::NoOutcome, None));
    }
    Ok(Checked { steps, outcome })
}

fn parse_item(s: &str) -> Option<ItemCode> {
    ItemCode::parse(s).ok()
}

/// Validates one raw record. Accepts iff every symbol is in `a`..`k`, the
/// journey starts in stage 1, every adjacent stage pair is legal, exactly one
/// outcome item ends the journey, and there are at most 10 pre-purchase events.
pub fn validate(record: &RawRecord) -> std::result::Result<Journey, Rejection> {
    check(&record.items, parse_item, true)
        .map(|c| Journey::from_parts(record.id.clone(), c.steps, c.outcome))
        .map_err(|(reason, position)| Rejection {
            id: record.id.clone(),
            reason,
            position,
        })
}

/// Validates an ad-hoc query journey, e.g. a draft being composed. Same rules
/// as [`validate`], except the outcome may be missing, and the canonical
/// outcome symbols `1` and `0` are accepted as aliases of `i` and `k`.
pub fn parse_query<S: AsRef<str>>(
    id: impl Into<String>,
    symbols: &[S],
) -> std::result::Result<Journey, Rejection> {
    let id = id.into();
    let parse = |s: &str| match s.trim() {
        "1" => Some(ItemCode::I),
        "0" => Some(ItemCode::K),
        other => parse_item(other),
    };
    check(symbols, parse, false)
        .map(|c| Journey::from_parts(id.clone(), c.steps, c.outcome))
        .map_err(|(reason, position)| Rejection {
            id,
            reason,
            position,
        })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CleansingReport {
    pub input: usize,
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
    /// Count per reason code; every code is present, possibly with zero.
    pub histogram: BTreeMap<String, usize>,
}

impl CleansingReport {
    fn new(input: usize, accepted: usize, rejected: Vec<Rejection>) -> Self {
        let mut histogram: BTreeMap<String, usize> =
            RejectReason::ALL.iter().map(|r| (r.code().to_string(), 0)).collect();
        for r in &rejected {
            *histogram.get_mut(r.reason.code()).expect("all codes seeded") += 1;
        }
        CleansingReport {
            input,
            accepted,
            rejected,
            histogram,
        }
    }
}

/// Validates every record. Accepted journeys keep input order. A record whose
/// id repeats an earlier accepted id is rejected as malformed input.
pub fn cleanse(
    records: &[RawRecord],
    provenance: impl Into<String>,
) -> (Result<Dataset>, CleansingReport) {
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    let mut ids = std::collections::HashSet::new();
    for record in records {
        match validate(record) {
            Ok(journey) => {
                if ids.insert(journey.id().to_string()) {
                    accepted.push(journey);
                } else {
                    return (
                        Err(Error::InvalidParameter(format!(
                            "duplicate journey id {:?}",
                            record.id
                        ))),
                        CleansingReport::new(records.len(), accepted.len(), rejected),
                    );
                }
            }
            Err(rejection) => rejected.push(rejection),
        }
    }
    let report = CleansingReport::new(records.len(), accepted.len(), rejected);
    let dataset = if accepted.is_empty() {
        Err(Error::EmptyDataset)
    } else {
        Dataset::new(accepted, provenance)
    };
    (dataset, report)
}

/// Loads and cleanses in one step.
pub fn read_dataset<R: Read>(
    source: R,
    format: Format,
    provenance: impl Into<String>,
) -> Result<(Dataset, CleansingReport)> {
    let records = load(source, format)?;
    let (dataset, report) = cleanse(&records, provenance);
    Ok((dataset?, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LengthStats {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageStats {
    pub journeys: usize,
    /// Per stage, the frequency of every item of that stage (zeros included).
    pub frequencies: BTreeMap<Stage, BTreeMap<ItemCode, usize>>,
    pub purchases: usize,
    pub non_purchases: usize,
    /// Number of stage-2 events per journey.
    pub st2_length: LengthStats,
}

impl StageStats {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for (stage, freqs) in &self.frequencies {
            out.push_str(&format!("{stage}\n"));
            for (item, n) in freqs {
                out.push_str(&format!("  {item}  {n:>4}  {}\n", item.caption()));
            }
        }
        out.push_str(&format!(
            "outcomes: purchase {}  non-purchase {}\n",
            self.purchases, self.non_purchases
        ));
        out.push_str(&format!(
            "st2 events per journey: min {}  max {}  mean {:.2}\n",
            self.st2_length.min, self.st2_length.max, self.st2_length.mean
        ));
        out
    }
}

pub fn describe(dataset: &Dataset) -> StageStats {
    let mut frequencies: BTreeMap<Stage, BTreeMap<ItemCode, usize>> = BTreeMap::new();
    for item in ItemCode::ALL {
        if let Some(stage) = item.stage() {
            frequencies.entry(stage).or_default().insert(item, 0);
        }
    }
    for (&item, &n) in dataset.item_counts() {
        if let Some(stage) = item.stage() {
            *frequencies.entry(stage).or_default().entry(item).or_insert(0) += n;
        }
    }
    let st2: Vec<usize> = dataset
        .journeys()
        .iter()
        .map(|j| j.project(Stage::St2).items.len())
        .collect();
    let purchases = dataset
        .journeys()
        .iter()
        .filter(|j| j.label() == Some(Outcome::Purchase))
        .count();
    StageStats {
        journeys: dataset.len(),
        frequencies,
        purchases,
        non_purchases: dataset.len() - purchases,
        st2_length: LengthStats {
            min: st2.iter().copied().min().unwrap_or(0),
            max: st2.iter().copied().max().unwrap_or(0),
            mean: st2.iter().sum::<usize>() as f64 / st2.len().max(1) as f64,
        },
    }
}

/// Ordered adjacent-pair counts over canonical symbols `a`..`h`, `1`, `0`.
/// Rows are the "from" symbol, columns the "to" symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceMatrix {
    counts: [[u64; 10]; 10],
}

impl CooccurrenceMatrix {
    pub fn get(&self, from: Symbol, to: Symbol) -> u64 {
        self.counts[from.index()][to.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn rows(&self) -> &[[u64; 10]; 10] {
        &self.counts
    }

    /// Nonzero cells as `(from, to, count)` in row-major order.
    pub fn nonzero(&self) -> Vec<(Symbol, Symbol, u64)> {
        let mut out = Vec::new();
        for from in Symbol::ALL {
            for to in Symbol::ALL {
                let n = self.get(from, to);
                if n > 0 {
                    out.push((from, to, n));
                }
            }
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("from\\to");
        for to in Symbol::ALL {
            out.push_str(&format!("{to:>5}"));
        }
        out.push('\n');
        for from in Symbol::ALL {
            out.push_str(&format!("{from:>7}"));
            for to in Symbol::ALL {
                out.push_str(&format!("{:>5}", self.get(from, to)));
            }
            out.push('\n');
        }
        out
    }
}

impl Serialize for CooccurrenceMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let symbols: Vec<String> = Symbol::ALL.iter().map(ToString::to_string).collect();
        let mut s = serializer.serialize_struct("CooccurrenceMatrix", 2)?;
        s.serialize_field("symbols", &symbols)?;
        s.serialize_field("counts", &self.counts)?;
        s.end()
    }
}

pub fn cooccurrence(dataset: &Dataset) -> CooccurrenceMatrix {
    let mut counts = [[0u64; 10]; 10];
    for journey in dataset.journeys() {
        let symbols = journey.canonical();
        for pair in symbols.windows(2) {
            counts[pair[0].index()][pair[1].index()] += 1;
        }
    }
    CooccurrenceMatrix { counts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Symbol::{Item, Purchase};

    fn rec(id: &str, items: &str) -> RawRecord {
        RawRecord::new(id, items.chars().map(|c| c.to_string()))
    }

    fn ds(items: &[&str]) -> Dataset {
        let records: Vec<RawRecord> = items
            .iter()
            .enumerate()
            .map(|(i, s)| rec(&format!("r{i}"), s))
            .collect();
        cleanse(&records, "test").0.unwrap()
    }

    #[test]
    fn csv_rows_map_directly() {
        let src = "r01,c,e,g,i\n\nr02,c,z\n";
        let records = load(src.as_bytes(), Format::Csv).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0], RawRecord::new("r01", ["c", "e", "g", "i"]));
        assert_eq!(records[1].items, vec!["c", "z"]);
    }

    #[test]
    fn csv_malformed_rows() {
        let err = load("r01,c,i\nr02\n".as_bytes(), Format::Csv).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { row: 2, .. }));
        let err = load(",c,i\n".as_bytes(), Format::Csv).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { row: 1, .. }));
    }

    #[test]
    fn jsonl_records() {
        let line = r#"{"id":"x","items":["c","e","e","e","e","e","e","e","e","e","i"],"label":1}"#;
        let records = load(line.as_bytes(), Format::Jsonl).unwrap();
        assert_eq!(records[0].items.len(), 11);
        let err = load("{\"id\":1}\n".as_bytes(), Format::Jsonl).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { row: 1, .. }));
    }

    fn reason(items: &str) -> Option<RejectReason> {
        validate(&rec("x", items)).err().map(|r| r.reason)
    }

    #[test]
    fn validation_rules() {
        assert_eq!(reason("cegi"), None);
        assert_eq!(reason("cgbei"), None);
        assert_eq!(reason("cie"), Some(RejectReason::EventAfterOutcome));
        assert_eq!(reason("ecgk"), Some(RejectReason::IllegalTransition));
        assert_eq!(reason("ceg"), Some(RejectReason::NoOutcome));
        assert_eq!(reason("cgil"), Some(RejectReason::PostPurchaseItem));
        assert_eq!(reason("czi"), Some(RejectReason::UnknownSymbol));
        assert_eq!(reason("ceeeeeeeeei"), None);
        assert_eq!(reason("ceeeeeeeeeei"), Some(RejectReason::TooLong));
        assert_eq!(reason("ck"), None);
    }

    #[test]
    fn rejection_position_is_first_violation() {
        let r = validate(&rec("x", "cizl")).unwrap_err();
        assert_eq!((r.reason, r.position), (RejectReason::UnknownSymbol, Some(3)));
    }

    #[test]
    fn validate_is_idempotent() {
        let j = validate(&rec("x", "cgbei")).unwrap();
        let again = RawRecord::new("x", j.items().map(|i| i.to_string()));
        assert_eq!(validate(&again).unwrap(), j);
    }

    #[test]
    fn query_allows_missing_outcome_and_aliases() {
        let q = parse_query("q", &["c", "c", "e", "g"]).unwrap();
        assert_eq!(q.label(), None);
        let q = parse_query("q", &["c", "e", "g", "0"]).unwrap();
        assert_eq!(q.label(), Some(Outcome::NonPurchase));
        assert_eq!(
            parse_query("q", &["e"]).unwrap_err().reason,
            RejectReason::IllegalTransition
        );
        assert!(parse_query::<&str>("q", &[]).is_ok());
    }

    #[test]
    fn cleanse_counts_and_empty() {
        let records = vec![rec("a", "ci"), rec("b", "ceg"), rec("c", "dk")];
        let (dataset, report) = cleanse(&records, "t");
        assert_eq!(dataset.unwrap().len(), 2);
        assert_eq!(report.accepted + report.rejected.len(), report.input);
        assert_eq!(report.histogram["NoOutcome"], 1);

        let (dataset, report) = cleanse(&[rec("a", "ceg"), rec("b", "d")], "t");
        assert_eq!(dataset, Err(Error::EmptyDataset));
        assert_eq!(report.accepted, 0);

        let (_, report) = cleanse(&[rec("a", "ci")], "t");
        assert!(report.rejected.is_empty());
    }

    #[test]
    fn describe_small() {
        let stats = describe(&ds(&["ci", "cei"]));
        assert_eq!(stats.st2_length, LengthStats { min: 0, max: 1, mean: 0.5 });

        let stats = describe(&ds(&["di"]));
        assert_eq!(stats.frequencies[&Stage::St1][&ItemCode::D], 1);
        assert_eq!(stats.frequencies[&Stage::St1][&ItemCode::A], 0);
        assert_eq!(stats.st2_length, LengthStats { min: 0, max: 0, mean: 0.0 });
    }

    #[test]
    fn cooccurrence_examples() {
        let m = cooccurrence(&ds(&["aei"]));
        assert_eq!(m.get(Item(ItemCode::A), Item(ItemCode::E)), 1);
        assert_eq!(m.get(Item(ItemCode::E), Purchase), 1);
        assert_eq!(m.total(), 2);

        let m = cooccurrence(&ds(&["dj", "di"]));
        assert_eq!(m.get(Item(ItemCode::D), Purchase), 2);

        let m = cooccurrence(&ds(&["cgbei"]));
        assert_eq!(
            m.nonzero(),
            vec![
                (Item(ItemCode::B), Item(ItemCode::E), 1),
                (Item(ItemCode::C), Item(ItemCode::G), 1),
                (Item(ItemCode::E), Purchase, 1),
                (Item(ItemCode::G), Item(ItemCode::B), 1),
            ]
        );
    }

    #[test]
    fn allowed_successors() {
        assert_eq!(allowed_next(None), vec![ItemCode::A, ItemCode::B, ItemCode::C, ItemCode::D]);
        assert_eq!(allowed_next(Some(Stage::St2)).len(), 11);
        assert!(allowed_next(Some(Stage::St3)).is_empty());
    }
}
