//! Distance-based k-NN prediction of the purchase outcome.
//!
//! The prediction for a query is the mean label of its `k` nearest training
//! journeys under the stage-weighted distance restricted to stages 1 and 2,
//! so the outcome event itself never influences the neighbourhood.

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::distance::{to_f64, DistanceConfig, StageMask, StagedSymbols, Weight};
use crate::error::{Error, Result};
use crate::model::{Dataset, Journey, Outcome};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighbor {
    /// Index into the model's training journeys.
    pub index: usize,
    pub id: String,
    pub distance: f64,
    pub label: Outcome,
}

/// Picks the `k` smallest `(index, distance)` pairs, ties to the lower index.
fn select<I: IntoIterator<Item = (usize, Weight)>>(distances: I, k: usize) -> Vec<(usize, Weight)> {
    let mut all: Vec<(usize, Weight)> = distances.into_iter().collect();
    all.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

#[derive(Debug, Clone)]
pub struct KnnModel {
    journeys: Vec<Journey>,
    staged: Vec<StagedSymbols>,
    labels: Vec<Outcome>,
    k: usize,
    config: DistanceConfig,
    weights: [Weight; 3],
}

impl KnnModel {
    /// Fits on every journey of the dataset.
    pub fn fit(dataset: &Dataset, k: usize, config: DistanceConfig) -> Result<Self> {
        Self::fit_journeys(dataset.journeys().to_vec(), k, config)
    }

    /// Fits on labelled journeys. The metric is always restricted to stages 1
    /// and 2; `config.weights` for stage 3 is ignored.
    pub fn fit_journeys(journeys: Vec<Journey>, k: usize, config: DistanceConfig) -> Result<Self> {
        if journeys.is_empty() {
            return Err(Error::EmptyModel);
        }
        if k == 0 || k > journeys.len() {
            return Err(Error::InvalidK {
                k,
                n: journeys.len(),
            });
        }
        let weights = config.weights.masked(StageMask::PRE_PURCHASE);
        if weights.iter().all(Zero::is_zero) {
            return Err(Error::DegenerateConfig);
        }
        let labels = journeys
            .iter()
            .map(Journey::outcome_label)
            .collect::<Result<Vec<_>>>()?;
        let staged = journeys.iter().map(StagedSymbols::of).collect();
        Ok(KnnModel {
            journeys,
            staged,
            labels,
            k,
            config,
            weights,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn config(&self) -> &DistanceConfig {
        &self.config
    }

    pub fn mask(&self) -> StageMask {
        StageMask::PRE_PURCHASE
    }

    pub fn len(&self) -> usize {
        self.journeys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.journeys.is_empty()
    }

    pub fn journeys(&self) -> &[Journey] {
        &self.journeys
    }

    pub fn with_k(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.journeys.len() {
            return Err(Error::InvalidK {
                k,
                n: self.journeys.len(),
            });
        }
        Ok(KnnModel { k, ..self.clone() })
    }

    /// Exact masked distance from `query` to training journey `index`.
    pub fn distance_to(&self, query: &Journey, index: usize) -> Weight {
        StagedSymbols::of(query).distance(&self.staged[index], &self.weights, self.config.kernel)
    }

    /// The `k` nearest training journeys, nearest first; equal distances are
    /// ordered by training index.
    pub fn neighbors(&self, query: &Journey) -> Vec<Neighbor> {
        let q = StagedSymbols::of(query);
        let distances = self
            .staged
            .iter()
            .enumerate()
            .map(|(i, s)| (i, q.distance(s, &self.weights, self.config.kernel)));
        select(distances, self.k)
            .into_iter()
            .map(|(i, d)| Neighbor {
                index: i,
                id: self.journeys[i].id().to_string(),
                distance: to_f64(d),
                label: self.labels[i],
            })
            .collect()
    }

    /// Mean label of the `k` nearest neighbours, in `[0, 1]`.
    pub fn predict_value(&self, query: &Journey) -> f64 {
        mean_label(self.neighbors(query).iter().map(|n| n.label), self.k)
    }

    /// `Purchase` iff the predicted value is at least `threshold` (so a value
    /// of exactly 0.5 classifies as a purchase under the default threshold).
    pub fn classify(&self, query: &Journey, threshold: f64) -> Outcome {
        classify_value(self.predict_value(query), threshold)
    }
}

fn mean_label(labels: impl Iterator<Item = Outcome>, k: usize) -> f64 {
    labels.map(Outcome::value).sum::<f64>() / k as f64
}

pub fn classify_value(value: f64, threshold: f64) -> Outcome {
    if value >= threshold {
        Outcome::Purchase
    } else {
        Outcome::NonPurchase
    }
}

/// Confusion counts with purchase as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, actual: Outcome, predicted: Outcome) {
        match (actual, predicted) {
            (Outcome::Purchase, Outcome::Purchase) => self.tp += 1,
            (Outcome::NonPurchase, Outcome::Purchase) => self.fp += 1,
            (Outcome::NonPurchase, Outcome::NonPurchase) => self.tn += 1,
            (Outcome::Purchase, Outcome::NonPurchase) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => (self.tp + self.tn) as f64 / n as f64,
        }
    }

    /// F1 of the purchase class; 0 when undefined.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Protocol {
    pub train_fraction: f64,
    pub stratified: bool,
    pub repetitions: usize,
    pub base_seed: u64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub k: usize,
    pub accuracy_mean: f64,
    pub accuracy_var: f64,
    pub f1_mean: f64,
    pub f1_var: f64,
    pub accuracy: Vec<f64>,
    pub f1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub config: DistanceConfig,
    pub mask: StageMask,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>3}  {:>9}  {:>9}  {:>9}  {:>9}\n",
            "k'", "acc mean", "acc var", "F1 mean", "F1 var"
        );
        for row in &self.rows {
            out.push_str(&format!(
                "{:>3}  {:>9.4}  {:>9.5}  {:>9.4}  {:>9.5}\n",
                row.k, row.accuracy_mean, row.accuracy_var, row.f1_mean, row.f1_var
            ));
        }
        out
    }
}

/// Mean and unbiased sample variance (0 for fewer than two values).
fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Stratified split of row indices into `(train, test)`, both ascending.
/// Each class contributes `round(0.2·n_c)` test rows, at least one when the
/// class has two or more rows, and never all of them.
pub fn stratified_split(labels: &[Outcome], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [Outcome::Purchase, Outcome::NonPurchase] {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        rows.shuffle(&mut rng);
        let n = rows.len();
        let n_test = if n < 2 {
            0
        } else {
            (((1.0 - TRAIN_FRACTION) * n as f64).round() as usize).clamp(1, n - 1)
        };
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Repeated stratified 80/20 evaluation. Repetition `r` shuffles with seed
/// `base_seed + r`; every k′ is scored on the same split within a repetition.
pub fn evaluate(
    dataset: &Dataset,
    ks: &[usize],
    repetitions: usize,
    base_seed: u64,
    config: DistanceConfig,
) -> Result<EvalReport> {
    let labels = dataset.labels();
    if !labels.contains(&Outcome::Purchase) || !labels.contains(&Outcome::NonPurchase) {
        return Err(Error::SingleClassDataset);
    }
    if ks.is_empty() || repetitions == 0 {
        return Err(Error::InvalidParameter("need at least one k' and one repetition".into()));
    }
    let weights = config.weights.masked(StageMask::PRE_PURCHASE);
    if weights.iter().all(Zero::is_zero) {
        return Err(Error::DegenerateConfig);
    }
    let staged: Vec<StagedSymbols> = dataset.journeys().iter().map(StagedSymbols::of).collect();
    let n = staged.len();
    let mut dist = vec![Weight::zero(); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = staged[i].distance(&staged[j], &weights, config.kernel);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut accuracy = vec![Vec::with_capacity(repetitions); ks.len()];
    let mut f1 = vec![Vec::with_capacity(repetitions); ks.len()];
    for r in 0..repetitions {
        let (train, test) = stratified_split(&labels, base_seed.wrapping_add(r as u64));
        for (ki, &k) in ks.iter().enumerate() {
            if k == 0 || k > train.len() {
                return Err(Error::InvalidK { k, n: train.len() });
            }
            let mut confusion = Confusion::default();
            for &q in &test {
                let near = select(train.iter().enumerate().map(|(t, &row)| (t, dist[q * n + row])), k);
                let value = mean_label(near.iter().map(|&(t, _)| labels[train[t]]), k);
                confusion.record(labels[q], classify_value(value, DEFAULT_THRESHOLD));
            }
            accuracy[ki].push(confusion.accuracy());
            f1[ki].push(confusion.f1());
        }
    }
    let rows = ks
        .iter()
        .enumerate()
        .map(|(ki, &k)| {
            let (accuracy_mean, accuracy_var) = mean_var(&accuracy[ki]);
            let (f1_mean, f1_var) = mean_var(&f1[ki]);
            EvalRow {
                k,
                accuracy_mean,
                accuracy_var,
                f1_mean,
                f1_var,
                accuracy: std::mem::take(&mut accuracy[ki]),
                f1: std::mem::take(&mut f1[ki]),
            }
        })
        .collect();
    Ok(EvalReport {
        protocol: Protocol {
            train_fraction: TRAIN_FRACTION,
            stratified: true,
            repetitions,
            base_seed,
            threshold: DEFAULT_THRESHOLD,
        },
        config,
        mask: StageMask::PRE_PURCHASE,
        rows,
    })
}
