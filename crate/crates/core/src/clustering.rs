//! Prototype extraction with k-medoids over a [`DistanceMatrix`].
//!
//! Seeding uses k-medoids++ and the refinement is a full PAM swap search:
//! each iteration applies the single (medoid, non-medoid) exchange with the
//! largest decrease of the total distance to the nearest medoid, and stops
//! when no exchange decreases it. Everything is deterministic for a seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::distance::{distance_matrix, DistanceConfig, DistanceMatrix, StageMask};
use crate::error::{Error, Result};
use crate::model::{Dataset, Outcome};

const MAX_SWAP_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusteringResult {
    pub k: usize,
    /// Row indices of the medoids, ascending. Cluster `c` has medoid `medoids[c]`.
    pub medoids: Vec<usize>,
    pub medoid_ids: Vec<String>,
    /// Cluster id per row.
    pub assignment: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Sum over rows of the distance to the assigned medoid.
    pub objective: f64,
    /// Objective of the k-medoids++ seeding before any swap.
    pub initial_objective: f64,
    /// Mean silhouette; `None` when `k = 1`.
    pub silhouette: Option<f64>,
    pub seed: u64,
    pub swaps: usize,
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check_k(matrix: &DistanceMatrix, k: usize) -> Result<()> {
    if k == 0 || k > matrix.len() {
        return Err(Error::InvalidK { k, n: matrix.len() });
    }
    Ok(())
}

/// k-medoids++ seeding: the first medoid is uniform, each further medoid is
/// drawn with probability proportional to its squared distance to the
/// nearest medoid chosen so far. When every remaining point coincides with a
/// chosen medoid the draw falls back to uniform over the remaining points.
pub fn kmedoids_pp_init(matrix: &DistanceMatrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    check_k(matrix, k)?;
    let n = matrix.len();
    let mut rng = rng_for(seed);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut medoids = vec![first];
    let mut weight: Vec<f64> = (0..n).map(|i| matrix.get(i, first).powi(2)).collect();
    while medoids.len() < k {
        let total: f64 = (0..n).filter(|&i| !chosen[i]).map(|i| weight[i]).sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for i in (0..n).filter(|&i| !chosen[i] && weight[i] > 0.0) {
                acc += weight[i];
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            let remaining: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            remaining[rng.random_range(0..remaining.len())]
        };
        chosen[next] = true;
        medoids.push(next);
        for (i, w) in weight.iter_mut().enumerate() {
            *w = w.min(matrix.get(i, next).powi(2));
        }
    }
    Ok(medoids)
}

/// Assigns every row to its nearest medoid. Medoids own themselves; other
/// ties go to the lowest medoid row index. `medoids` must be ascending.
/// Returns the assignment and the objective.
pub fn assign(matrix: &DistanceMatrix, medoids: &[usize]) -> (Vec<usize>, f64) {
    let n = matrix.len();
    let mut assignment = vec![0; n];
    let mut objective = 0.0;
    for (i, slot) in assignment.iter_mut().enumerate() {
        let (cluster, d) = match medoids.iter().position(|&m| m == i) {
            Some(c) => (c, 0.0),
            None => nearest(matrix, medoids, i),
        };
        *slot = cluster;
        objective += d;
    }
    (assignment, objective)
}

fn nearest(matrix: &DistanceMatrix, medoids: &[usize], i: usize) -> (usize, f64) {
    let mut best = (0, matrix.get(i, medoids[0]));
    for (c, &m) in medoids.iter().enumerate().skip(1) {
        let d = matrix.get(i, m);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Nearest and second-nearest medoid distances per row.
fn near_and_second(matrix: &DistanceMatrix, medoids: &[usize]) -> Vec<(usize, f64, f64)> {
    (0..matrix.len())
        .map(|i| {
            let mut near = (usize::MAX, f64::INFINITY);
            let mut second = f64::INFINITY;
            for (c, &m) in medoids.iter().enumerate() {
                let d = if m == i { 0.0 } else { matrix.get(i, m) };
                if d < near.1 {
                    second = near.1;
                    near = (c, d);
                } else if d < second {
                    second = d;
                }
            }
            (near.0, near.1, second)
        })
        .collect()
}

/// Objective after replacing medoid at position `out` with row `x`.
fn swap_objective(matrix: &DistanceMatrix, cache: &[(usize, f64, f64)], out: usize, x: usize) -> f64 {
    let mut total = 0.0;
    for (i, &(near, d_near, d_second)) in cache.iter().enumerate() {
        let d_new = if i == x { 0.0 } else { matrix.get(i, x) };
        let kept = if near == out { d_second } else { d_near };
        total += kept.min(d_new);
    }
    total
}

/// PAM refinement from the given initial medoids.
pub fn kmedoids_from(matrix: &DistanceMatrix, initial: &[usize], seed: u64) -> Result<ClusteringResult> {
    let k = initial.len();
    check_k(matrix, k)?;
    let n = matrix.len();
    let mut medoids = initial.to_vec();
    medoids.sort_unstable();
    medoids.dedup();
    if medoids.len() != k || medoids.iter().any(|&m| m >= n) {
        return Err(Error::InvalidParameter("initial medoids must be distinct rows".into()));
    }
    let (_, initial_objective) = assign(matrix, &medoids);
    let mut objective = initial_objective;
    let mut swaps = 0;
    for _ in 0..MAX_SWAP_ITERATIONS {
        let cache = near_and_second(matrix, &medoids);
        let mut best: Option<(usize, usize, f64)> = None;
        for out in 0..k {
            for x in 0..n {
                if medoids.binary_search(&x).is_ok() {
                    continue;
                }
                let candidate = swap_objective(matrix, &cache, out, x);
                if best.is_none_or(|(_, _, b)| candidate < b) {
                    best = Some((out, x, candidate));
                }
            }
        }
        let tol = 1e-12 * objective.abs().max(1.0);
        match best {
            Some((out, x, candidate)) if candidate < objective - tol => {
                medoids[out] = x;
                medoids.sort_unstable();
                objective = assign(matrix, &medoids).1;
                swaps += 1;
            }
            _ => break,
        }
    }
    let (assignment, objective) = assign(matrix, &medoids);
    let mut sizes = vec![0; k];
    for &c in &assignment {
        sizes[c] += 1;
    }
    let silhouette = if k >= 2 {
        Some(silhouette(matrix, &assignment)?)
    } else {
        None
    };
    Ok(ClusteringResult {
        k,
        medoid_ids: medoids.iter().map(|&m| matrix.ids()[m].clone()).collect(),
        medoids,
        assignment,
        sizes,
        objective,
        initial_objective,
        silhouette,
        seed,
        swaps,
    })
}

/// k-medoids++ seeding followed by PAM swaps.
pub fn kmedoids(matrix: &DistanceMatrix, k: usize, seed: u64) -> Result<ClusteringResult> {
    let initial = kmedoids_pp_init(matrix, k, seed)?;
    kmedoids_from(matrix, &initial, seed)
}

fn validate_assignment(n: usize, assignment: &[usize]) -> Result<usize> {
    if assignment.len() != n {
        return Err(Error::InvalidAssignment(format!(
            "{} labels for {n} points",
            assignment.len()
        )));
    }
    let clusters = assignment.iter().max().map_or(0, |&m| m + 1);
    if clusters < 2 {
        return Err(Error::InvalidAssignment("need at least two clusters".into()));
    }
    let mut sizes = vec![0usize; clusters];
    for &c in assignment {
        sizes[c] += 1;
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::InvalidAssignment(format!("cluster {empty} is empty")));
    }
    Ok(clusters)
}

/// Per-point silhouette values `(b − a) / max(a, b)`. Points in singleton
/// clusters score 0.
pub fn silhouette_samples(matrix: &DistanceMatrix, assignment: &[usize]) -> Result<Vec<f64>> {
    let n = matrix.len();
    let clusters = validate_assignment(n, assignment)?;
    let mut sizes = vec![0usize; clusters];
    for &c in assignment {
        sizes[c] += 1;
    }
    let mut out = Vec::with_capacity(n);
    let mut sums = vec![0.0; clusters];
    for i in 0..n {
        let own = assignment[i];
        if sizes[own] == 1 {
            out.push(0.0);
            continue;
        }
        sums.fill(0.0);
        for j in 0..n {
            if j != i {
                sums[assignment[j]] += matrix.get(i, j);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..clusters)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        out.push(if denom > 0.0 { (b - a) / denom } else { 0.0 });
    }
    Ok(out)
}

/// Mean silhouette coefficient.
pub fn silhouette(matrix: &DistanceMatrix, assignment: &[usize]) -> Result<f64> {
    let samples = silhouette_samples(matrix, assignment)?;
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// A medoid journey and the size of its cluster.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prototype {
    pub cluster: usize,
    pub row: usize,
    pub id: String,
    pub sequence: String,
    pub label: Option<Outcome>,
    pub size: usize,
}

pub fn prototypes(dataset: &Dataset, result: &ClusteringResult) -> Vec<Prototype> {
    result
        .medoids
        .iter()
        .enumerate()
        .map(|(cluster, &row)| {
            let journey = &dataset.journeys()[row];
            Prototype {
                cluster,
                row,
                id: journey.id().to_string(),
                sequence: journey.notation(),
                label: journey.label(),
                size: result.sizes[cluster],
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub config: String,
    pub k: usize,
    pub silhouette: Option<f64>,
    pub objective: f64,
    pub result: ClusteringResult,
}

/// Silhouette grid over distance configurations and cluster counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub seed: u64,
    pub configs: Vec<DistanceConfig>,
    pub ks: Vec<usize>,
    /// Row-major over `configs × ks`.
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    pub fn cell(&self, config: usize, k: usize) -> Option<&SweepCell> {
        let col = self.ks.iter().position(|&x| x == k)?;
        self.cells.get(config * self.ks.len() + col)
    }

    /// Text table: one row per configuration, one column per k.
    pub fn to_table(&self) -> String {
        let width = self
            .configs
            .iter()
            .map(|c| c.label().len())
            .max()
            .unwrap_or(6)
            .max(6);
        let mut out = format!("{:<width$}", "config");
        for k in &self.ks {
            out.push_str(&format!("  {:>6}", format!("k={k}")));
        }
        out.push('\n');
        for (ci, config) in self.configs.iter().enumerate() {
            out.push_str(&format!("{:<width$}", config.label()));
            for ki in 0..self.ks.len() {
                let cell = &self.cells[ci * self.ks.len() + ki];
                match cell.silhouette {
                    Some(s) => out.push_str(&format!("  {s:>6.3}")),
                    None => out.push_str(&format!("  {:>6}", "-")),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Clusters the dataset for every `(config, k)` pair with the same seed.
pub fn sweep(dataset: &Dataset, configs: &[DistanceConfig], ks: &[usize], seed: u64) -> Result<SweepReport> {
    if configs.is_empty() || ks.is_empty() {
        return Err(Error::InvalidParameter("empty sweep grid".into()));
    }
    let mut cells = Vec::with_capacity(configs.len() * ks.len());
    for config in configs {
        let matrix = distance_matrix(dataset, config, StageMask::ALL)?;
        for &k in ks {
            let result = kmedoids(&matrix, k, seed)?;
            cells.push(SweepCell {
                config: config.label(),
                k,
                silhouette: result.silhouette,
                objective: result.objective,
                result,
            });
        }
    }
    Ok(SweepReport {
        seed,
        configs: configs.to_vec(),
        ks: ks.to_vec(),
        cells,
    })
}
