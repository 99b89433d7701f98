//! Stage-weighted edit distance between journeys.
//!
//! The distance of two journeys is the weighted sum, over stages, of the edit
//! distance between their stage projections:
//!
//! ```text
//! D(a, b) = w1·d(a|st1, b|st1) + w2·d(a|st2, b|st2) + w3·d(a|st3, b|st3)
//! ```
//!
//! `d` is a unit-cost Levenshtein or (unrestricted) Damerau-Levenshtein
//! distance; both are metrics, and a non-negative weighted sum of metrics over
//! the stage components is again a metric on journeys. Weights are exact
//! rationals so metric axioms can be checked without rounding; matrices store
//! `f64` values converted once per pair.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{Dataset, Journey, Stage, Symbol};

/// Non-negative rational weight.
pub type Weight = Ratio<u64>;

/// Parses `2`, `0.25` or `1/3` into an exact weight.
pub fn parse_weight(text: &str) -> Result<Weight> {
    let s = text.trim();
    let bad = || Error::InvalidWeight(text.to_string());
    if let Some((num, den)) = s.split_once('/') {
        let num: u64 = num.trim().parse().map_err(|_| bad())?;
        let den: u64 = den.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(num, den));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if (int.is_empty() && frac.is_empty())
        || !int.chars().all(|c| c.is_ascii_digit())
        || !frac.chars().all(|c| c.is_ascii_digit())
        || frac.len() > 12
    {
        return Err(bad());
    }
    let den = 10u64.pow(frac.len() as u32);
    let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
    let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    let num = int
        .checked_mul(den)
        .and_then(|v| v.checked_add(frac))
        .ok_or_else(bad)?;
    Ok(Ratio::new(num, den))
}

fn weight_to_string(w: &Weight) -> String {
    if w.is_integer() {
        w.numer().to_string()
    } else {
        format!("{}/{}", w.numer(), w.denom())
    }
}

/// Per-stage weights `(w1, w2, w3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StageWeights([Weight; 3]);

impl StageWeights {
    /// At least one weight must be positive.
    pub fn new(w1: Weight, w2: Weight, w3: Weight) -> Result<Self> {
        let weights = StageWeights([w1, w2, w3]);
        if weights.0.iter().all(Zero::is_zero) {
            return Err(Error::DegenerateConfig);
        }
        Ok(weights)
    }

    pub fn integers(w1: u64, w2: u64, w3: u64) -> Result<Self> {
        Self::new(Ratio::from(w1), Ratio::from(w2), Ratio::from(w3))
    }

    pub fn parse(w1: &str, w2: &str, w3: &str) -> Result<Self> {
        Self::new(parse_weight(w1)?, parse_weight(w2)?, parse_weight(w3)?)
    }

    pub fn unit() -> Self {
        StageWeights([Ratio::from(1); 3])
    }

    pub fn get(&self, stage: Stage) -> Weight {
        self.0[stage.index()]
    }

    pub fn as_array(&self) -> [Weight; 3] {
        self.0
    }

    pub fn as_f64(&self) -> [f64; 3] {
        self.0.map(|w| w.to_f64().unwrap_or(f64::NAN))
    }

    /// Weights with masked-out stages set to zero.
    pub fn masked(&self, mask: StageMask) -> [Weight; 3] {
        let mut out = self.0;
        for stage in Stage::ALL {
            if !mask.contains(stage) {
                out[stage.index()] = Ratio::zero();
            }
        }
        out
    }
}

impl fmt::Display for StageWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.0.map(|w| weight_to_string(&w));
        write!(f, "({a},{b},{c})")
    }
}

impl Serialize for StageWeights {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("StageWeights", 3)?;
        s.serialize_field("w1", &weight_to_string(&self.0[0]))?;
        s.serialize_field("w2", &weight_to_string(&self.0[1]))?;
        s.serialize_field("w3", &weight_to_string(&self.0[2]))?;
        s.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Kernel {
    #[default]
    Levenshtein,
    DamerauLevenshtein,
}

impl Kernel {
    pub fn name(self) -> &'static str {
        match self {
            Kernel::Levenshtein => "levenshtein",
            Kernel::DamerauLevenshtein => "damerau_levenshtein",
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "levenshtein" | "lev" | "ld" => Ok(Kernel::Levenshtein),
            "damerau_levenshtein" | "damerau" | "dl" => Ok(Kernel::DamerauLevenshtein),
            other => Err(Error::InvalidParameter(format!("unknown kernel {other:?}"))),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Kernel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

/// Set of stages that enter a distance computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StageMask(u8);

impl StageMask {
    pub const ALL: StageMask = StageMask(0b111);
    /// Stages 1 and 2: everything before the outcome.
    pub const PRE_PURCHASE: StageMask = StageMask(0b011);
    pub const NONE: StageMask = StageMask(0);

    pub fn of(stages: &[Stage]) -> Self {
        StageMask(stages.iter().fold(0, |m, s| m | (1 << s.index())))
    }

    pub fn contains(self, stage: Stage) -> bool {
        self.0 & (1 << stage.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn stages(self) -> impl Iterator<Item = Stage> {
        Stage::ALL.into_iter().filter(move |s| self.contains(*s))
    }
}

impl Default for StageMask {
    fn default() -> Self {
        StageMask::ALL
    }
}

impl FromStr for StageMask {
    type Err = Error;

    /// Comma-separated stage names, e.g. `st1,st2`.
    fn from_str(s: &str) -> Result<Self> {
        let mut stages = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let stage = match part {
                "st1" | "1" => Stage::St1,
                "st2" | "2" => Stage::St2,
                "st3" | "3" => Stage::St3,
                other => return Err(Error::InvalidParameter(format!("unknown stage {other:?}"))),
            };
            stages.push(stage);
        }
        Ok(StageMask::of(&stages))
    }
}

impl Serialize for StageMask {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let names: Vec<&str> = self.stages().map(Stage::name).collect();
        names.serialize(serializer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct DistanceConfig {
    pub weights: StageWeights,
    pub kernel: Kernel,
}

impl DistanceConfig {
    pub fn new(weights: StageWeights, kernel: Kernel) -> Self {
        DistanceConfig { weights, kernel }
    }

    pub fn levenshtein(weights: StageWeights) -> Self {
        Self::new(weights, Kernel::Levenshtein)
    }

    /// Short label such as `LD(2,1,10)` or `DL(1,1,1)`.
    pub fn label(&self) -> String {
        let prefix = match self.kernel {
            Kernel::Levenshtein => "LD",
            Kernel::DamerauLevenshtein => "DL",
        };
        format!("{prefix}{}", self.weights)
    }
}

/// Unit-cost edit distance between two symbol lists.
pub fn edit_distance<T: Eq + Copy>(x: &[T], y: &[T], kernel: Kernel) -> usize {
    match kernel {
        Kernel::Levenshtein => levenshtein(x, y),
        Kernel::DamerauLevenshtein => damerau_levenshtein(x, y),
    }
}

/// Full Levenshtein DP table, `(x.len()+1) × (y.len()+1)`, row-major.
pub(crate) fn levenshtein_table<T: Eq>(x: &[T], y: &[T]) -> Vec<Vec<usize>> {
    let mut table = vec![vec![0usize; y.len() + 1]; x.len() + 1];
    for (i, row) in table.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in table[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=x.len() {
        for j in 1..=y.len() {
            let sub = table[i - 1][j - 1] + usize::from(x[i - 1] != y[j - 1]);
            let del = table[i - 1][j] + 1;
            let ins = table[i][j - 1] + 1;
            table[i][j] = sub.min(del).min(ins);
        }
    }
    table
}

fn levenshtein<T: Eq>(x: &[T], y: &[T]) -> usize {
    // two-row variant of `levenshtein_table`
    let mut prev: Vec<usize> = (0..=y.len()).collect();
    let mut cur = vec![0usize; y.len() + 1];
    for (i, a) in x.iter().enumerate() {
        cur[0] = i + 1;
        for (j, b) in y.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(a != b))
                .min(prev[j + 1] + 1)
                .min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[y.len()]
}

/// Unrestricted Damerau-Levenshtein (Lowrance-Wagner). Unlike the optimal
/// string alignment variant it satisfies the triangle inequality.
fn damerau_levenshtein<T: Eq + Copy>(x: &[T], y: &[T]) -> usize {
    let (n, m) = (x.len(), y.len());
    let inf = n + m;
    // d[i + 1][j + 1] holds the distance of prefixes x[..i], y[..j]
    let mut d = vec![vec![0usize; m + 2]; n + 2];
    d[0][0] = inf;
    for i in 0..=n {
        d[i + 1][0] = inf;
        d[i + 1][1] = i;
    }
    for j in 0..=m {
        d[0][j + 1] = inf;
        d[1][j + 1] = j;
    }
    // last row (1-based) in which each symbol occurred in x
    let mut last_row: Vec<(T, usize)> = Vec::new();
    for i in 1..=n {
        let mut last_match_col = 0;
        for j in 1..=m {
            let k = last_row
                .iter()
                .find(|(s, _)| *s == y[j - 1])
                .map_or(0, |&(_, r)| r);
            let l = last_match_col;
            let cost = if x[i - 1] == y[j - 1] {
                last_match_col = j;
                0
            } else {
                1
            };
            let sub = d[i][j] + cost;
            let ins = d[i + 1][j] + 1;
            let del = d[i][j + 1] + 1;
            let trans = d[k][l] + (i - k - 1) + 1 + (j - l - 1);
            d[i + 1][j + 1] = sub.min(ins).min(del).min(trans);
        }
        match last_row.iter_mut().find(|(s, _)| *s == x[i - 1]) {
            Some(entry) => entry.1 = i,
            None => last_row.push((x[i - 1], i)),
        }
    }
    d[n + 1][m + 1]
}

/// Unweighted per-stage edit distances `[d1, d2, d3]`.
pub fn stage_distances(a: &Journey, b: &Journey, kernel: Kernel) -> [usize; 3] {
    Stage::ALL.map(|stage| edit_distance(&a.stage_symbols(stage), &b.stage_symbols(stage), kernel))
}

fn combine(weights: &[Weight; 3], parts: [usize; 3]) -> Weight {
    weights
        .iter()
        .zip(parts)
        .fold(Ratio::zero(), |acc, (w, d)| acc + w * Ratio::from(d as u64))
}

/// Exact weighted distance restricted to the stages in `mask`.
pub fn staged_distance_exact(
    a: &Journey,
    b: &Journey,
    config: &DistanceConfig,
    mask: StageMask,
) -> Weight {
    let weights = config.weights.masked(mask);
    let parts = Stage::ALL.map(|stage| {
        if weights[stage.index()].is_zero() {
            0
        } else {
            edit_distance(&a.stage_symbols(stage), &b.stage_symbols(stage), config.kernel)
        }
    });
    combine(&weights, parts)
}

/// Weighted distance over all three stages.
pub fn staged_distance(a: &Journey, b: &Journey, config: &DistanceConfig) -> f64 {
    to_f64(staged_distance_exact(a, b, config, StageMask::ALL))
}

pub fn to_f64(w: Weight) -> f64 {
    w.to_f64().unwrap_or(f64::INFINITY)
}

/// Cached canonical stage symbols of one journey.
#[derive(Debug, Clone)]
pub(crate) struct StagedSymbols([Vec<Symbol>; 3]);

impl StagedSymbols {
    pub(crate) fn of(journey: &Journey) -> Self {
        StagedSymbols(Stage::ALL.map(|s| journey.stage_symbols(s)))
    }

    pub(crate) fn distance(&self, other: &Self, weights: &[Weight; 3], kernel: Kernel) -> Weight {
        let parts = Stage::ALL.map(|stage| {
            let g = stage.index();
            if weights[g].is_zero() {
                0
            } else {
                edit_distance(&self.0[g], &other.0[g], kernel)
            }
        });
        combine(weights, parts)
    }
}

/// Symmetric pairwise distance matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceMatrix {
    ids: Vec<String>,
    config: Option<DistanceConfig>,
    mask: StageMask,
    n: usize,
    /// Row-major `n × n`.
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Wraps precomputed values (row-major), checking symmetry, a zero
    /// diagonal and non-negative finite entries.
    pub fn from_values(ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        if values.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "expected {} values for {n} ids, got {}",
                n * n,
                values.len()
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::InvalidParameter("nonzero diagonal".into()));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() || v < 0.0 || v != values[j * n + i] {
                    return Err(Error::InvalidParameter(format!(
                        "entry ({i},{j}) is negative, non-finite or asymmetric"
                    )));
                }
            }
        }
        Ok(DistanceMatrix {
            ids,
            config: None,
            mask: StageMask::ALL,
            n,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn config(&self) -> Option<&DistanceConfig> {
        self.config.as_ref()
    }

    pub fn mask(&self) -> StageMask {
        self.mask
    }

    /// First triple `(i, j, k)` with `d(i,k) > d(i,j) + d(j,k) + tol`, if any.
    pub fn triangle_violation(&self, tol: f64) -> Option<(usize, usize, usize)> {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if self.get(i, k) > self.get(i, j) + self.get(j, k) + tol {
                        return Some((i, j, k));
                    }
                }
            }
        }
        None
    }
}

/// Pairwise distances over a dataset. Stages outside `mask` contribute zero.
pub fn distance_matrix(
    dataset: &Dataset,
    config: &DistanceConfig,
    mask: StageMask,
) -> Result<DistanceMatrix> {
    let weights = config.weights.masked(mask);
    if weights.iter().all(Zero::is_zero) {
        return Err(Error::DegenerateConfig);
    }
    let staged: Vec<StagedSymbols> = dataset.journeys().iter().map(StagedSymbols::of).collect();
    let n = staged.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = to_f64(staged[i].distance(&staged[j], &weights, config.kernel));
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix {
        ids: dataset.ids(),
        config: Some(*config),
        mask,
        n,
        values,
    })
}
