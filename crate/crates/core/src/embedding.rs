//! Classical multidimensional scaling.
//!
//! The squared distance matrix is double-centred, `B = −½·C·D²·C` with
//! `C = I − (1/n)·11ᵀ`, then diagonalised with cyclic Jacobi rotations. The
//! two largest positive eigenpairs give planar coordinates `v·√λ`.
//!
//! Weighted edit distances are generally not Euclidean, so `B` can have
//! negative eigenvalues. They are dropped, and their share of the spectrum is
//! reported as `negative_mass`.

use serde::Serialize;

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 100;
/// Required off-diagonal Frobenius norm at termination, relative to ‖m‖.
pub const OFF_DIAGONAL_TOLERANCE: f64 = 1e-10;

/// Symmetric double-centred matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredMatrix {
    n: usize,
    values: Vec<f64>,
}

impl CenteredMatrix {
    /// Wraps an arbitrary symmetric matrix (row-major), e.g. for testing the
    /// eigensolver directly.
    pub fn from_symmetric(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::InvalidParameter("matrix is not square".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if values[i * n + j] != values[j * n + i] {
                    return Err(Error::InvalidParameter("matrix is not symmetric".into()));
                }
            }
        }
        Ok(CenteredMatrix { n, values })
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

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.values.chunks(self.n.max(1)).map(|r| r.iter().sum()).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `−½·C·D²·C`.
pub fn double_center(matrix: &DistanceMatrix) -> CenteredMatrix {
    let n = matrix.len();
    let sq: Vec<f64> = matrix.values().iter().map(|d| d * d).collect();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n)
        .map(|i| sq[i * n..(i + 1) * n].iter().sum::<f64>() / nf)
        .collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            // D² is symmetric, so column means equal row means
            let v = -0.5 * (sq[i * n + j] - row_means[i] - row_means[j] + grand);
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    CenteredMatrix { n, values }
}

/// Eigenvalues in descending order with orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    /// `vectors[i]` is the unit eigenvector for `values[i]`, with its first
    /// nonzero component positive.
    pub vectors: Vec<Vec<f64>>,
    pub sweeps: usize,
}

impl EigenSystem {
    /// `V·Λ·Vᵀ`, row-major.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.values.len();
        let mut out = vec![0.0; n * n];
        for (lambda, v) in self.values.iter().zip(&self.vectors) {
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] += lambda * v[i] * v[j];
                }
            }
        }
        out
    }
}

fn off_diagonal(a: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[i * n + j] * a[i * n + j];
            }
        }
    }
    sum.sqrt()
}

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn eigendecompose(m: &CenteredMatrix) -> Result<EigenSystem> {
    let n = m.n;
    let mut a = m.values.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let norm = m.frobenius();
    let mut sweeps = 0;
    let mut prev_off = f64::INFINITY;
    loop {
        let off = off_diagonal(&a, n);
        if off <= 1e-14 * norm || (off >= prev_off && off <= OFF_DIAGONAL_TOLERANCE * norm) {
            break;
        }
        if sweeps == MAX_SWEEPS {
            if off <= OFF_DIAGONAL_TOLERANCE * norm {
                break;
            }
            return Err(Error::NoConvergence { sweeps });
        }
        prev_off = off;
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep column order
    order.sort_by(|&x, &y| a[y * n + y].total_cmp(&a[x * n + x]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&col| {
            let mut vec: Vec<f64> = (0..n).map(|row| v[row * n + col]).collect();
            let scale = vec.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if let Some(first) = vec.iter().find(|x| x.abs() > 1e-10 * scale) {
                if *first < 0.0 {
                    vec.iter_mut().for_each(|x| *x = -*x);
                }
            }
            vec
        })
        .collect();
    Ok(EigenSystem {
        values,
        vectors,
        sweeps,
    })
}

/// Planar coordinates for a distance matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Embedding {
    pub ids: Vec<String>,
    pub xy: Vec<[f64; 2]>,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Σ|λ| over negative eigenvalues divided by Σ|λ| over all eigenvalues.
    pub negative_mass: f64,
    /// Fewer than two positive eigenvalues; missing coordinates are zero.
    pub degenerate: bool,
}

impl Embedding {
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let [x1, y1] = self.xy[i];
        let [x2, y2] = self.xy[j];
        ((x1 - x2).powi(2) + (y1 - y2).powi(2)).sqrt()
    }
}

pub fn mds(matrix: &DistanceMatrix) -> Result<Embedding> {
    let n = matrix.len();
    if n < 3 {
        return Err(Error::TooFewPoints(n));
    }
    let centered = double_center(matrix);
    let eig = eigendecompose(&centered)?;
    let scale = eig.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let positive_floor = 1e-9 * scale;
    let kept: Vec<usize> = (0..n)
        .filter(|&i| eig.values[i] > positive_floor)
        .take(2)
        .collect();
    let mut xy = vec![[0.0; 2]; n];
    let mut lambdas = [0.0; 2];
    for (axis, &idx) in kept.iter().enumerate() {
        let lambda = eig.values[idx];
        lambdas[axis] = lambda;
        let root = lambda.sqrt();
        for (row, point) in xy.iter_mut().enumerate() {
            point[axis] = eig.vectors[idx][row] * root;
        }
    }
    let total: f64 = eig.values.iter().map(|x| x.abs()).sum();
    let negative: f64 = eig
        .values
        .iter()
        .filter(|&&x| x < -positive_floor)
        .map(|x| x.abs())
        .sum();
    Ok(Embedding {
        ids: matrix.ids().to_vec(),
        xy,
        lambda1: lambdas[0],
        lambda2: lambdas[1],
        negative_mass: if total > 0.0 { negative / total } else { 0.0 },
        degenerate: kept.len() < 2,
    })
}
