//! Versioned dataset snapshots and per-snapshot caches.

use std::fs;
use std::io::Write;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use journey_core::distance::{Weight, StageMask};
use journey_core::ingest::{read_dataset, CleansingReport, Format};
use journey_core::{distance_matrix, Dataset, DistanceConfig, DistanceMatrix, Kernel, KnnModel, Result};
use lru::LruCache;

pub const MATRIX_CACHE_CAPACITY: usize = 8;
const MODEL_CACHE_CAPACITY: usize = 8;

/// An immutable dataset version. Requests hold an `Arc` to the snapshot they
/// started with, so a concurrent upload never changes what they see.
#[derive(Debug)]
pub struct Snapshot {
    pub version: u64,
    pub dataset: Option<Arc<Dataset>>,
    pub report: Option<CleansingReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct MatrixKey {
    version: u64,
    weights: [Weight; 3],
    kernel: Kernel,
    mask: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct ModelKey {
    version: u64,
    weights: [Weight; 3],
    kernel: Kernel,
    k: usize,
}

fn mask_bits(mask: StageMask) -> u8 {
    mask.stages().fold(0, |acc, s| acc | 1 << s.index())
}

#[derive(Debug)]
struct Inner {
    snapshot: RwLock<Arc<Snapshot>>,
    matrices: Mutex<LruCache<MatrixKey, Arc<DistanceMatrix>>>,
    models: Mutex<LruCache<ModelKey, Arc<KnnModel>>>,
    persist: Option<PathBuf>,
}

/// Shared service state; cheap to clone.
#[derive(Debug, Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl Default for AppState {
    fn default() -> Self {
        AppState::new(None)
    }
}

impl AppState {
    pub fn new(dataset: Option<(Dataset, CleansingReport)>) -> Self {
        let (dataset, report, version) = match dataset {
            Some((d, r)) => (Some(Arc::new(d)), Some(r), 1),
            None => (None, None, 0),
        };
        AppState {
            inner: Arc::new(Inner {
                snapshot: RwLock::new(Arc::new(Snapshot {
                    version,
                    dataset,
                    report,
                })),
                matrices: Mutex::new(LruCache::new(NonZeroUsize::new(MATRIX_CACHE_CAPACITY).unwrap())),
                models: Mutex::new(LruCache::new(NonZeroUsize::new(MODEL_CACHE_CAPACITY).unwrap())),
                persist: None,
            }),
        }
    }

    /// Persists every accepted upload as JSONL at `path`, and restores from
    /// it when the file exists.
    pub fn with_persistence(dataset: Option<(Dataset, CleansingReport)>, path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let dataset = match fs::File::open(&path) {
            Ok(file) => Some(read_dataset(file, Format::Jsonl, path.display().to_string())?),
            Err(_) => dataset,
        };
        let state = AppState::new(dataset);
        Ok(AppState {
            inner: Arc::new(Inner {
                persist: Some(path),
                ..Arc::try_unwrap(state.inner).expect("fresh state")
            }),
        })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        Arc::clone(&self.inner.snapshot.read().unwrap_or_else(|e| e.into_inner()))
    }

    /// Atomically replaces the dataset, returning the new version.
    pub fn replace(&self, dataset: Dataset, report: CleansingReport) -> std::io::Result<u64> {
        if let Some(path) = &self.inner.persist {
            persist(path, &dataset)?;
        }
        let mut slot = self.inner.snapshot.write().unwrap_or_else(|e| e.into_inner());
        let version = slot.version + 1;
        *slot = Arc::new(Snapshot {
            version,
            dataset: Some(Arc::new(dataset)),
            report: Some(report),
        });
        Ok(version)
    }

    /// Distance matrix for a snapshot, from the LRU cache when present.
    pub fn matrix(
        &self,
        snapshot: &Snapshot,
        dataset: &Dataset,
        config: &DistanceConfig,
        mask: StageMask,
    ) -> Result<Arc<DistanceMatrix>> {
        let key = MatrixKey {
            version: snapshot.version,
            weights: config.weights.as_array(),
            kernel: config.kernel,
            mask: mask_bits(mask),
        };
        if let Some(m) = self.lock_matrices().get(&key) {
            return Ok(Arc::clone(m));
        }
        // computed outside the lock; a concurrent fill of the same key is harmless
        let m = Arc::new(distance_matrix(dataset, config, mask)?);
        self.lock_matrices().put(key, Arc::clone(&m));
        Ok(m)
    }

    pub fn model(&self, snapshot: &Snapshot, dataset: &Dataset, config: &DistanceConfig, k: usize) -> Result<Arc<KnnModel>> {
        let key = ModelKey {
            version: snapshot.version,
            weights: config.weights.as_array(),
            kernel: config.kernel,
            k,
        };
        if let Some(m) = self.lock_models().get(&key) {
            return Ok(Arc::clone(m));
        }
        let m = Arc::new(KnnModel::fit(dataset, k, *config)?);
        self.lock_models().put(key, Arc::clone(&m));
        Ok(m)
    }

    pub fn cached_matrices(&self) -> usize {
        self.lock_matrices().len()
    }

    fn lock_matrices(&self) -> std::sync::MutexGuard<'_, LruCache<MatrixKey, Arc<DistanceMatrix>>> {
        self.inner.matrices.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn lock_models(&self) -> std::sync::MutexGuard<'_, LruCache<ModelKey, Arc<KnnModel>>> {
        self.inner.models.lock().unwrap_or_else(|e| e.into_inner())
    }
}

fn persist(path: &Path, dataset: &Dataset) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut out = std::io::BufWriter::new(fs::File::create(&tmp)?);
        for j in dataset.journeys() {
            let items: Vec<String> = j.items().map(|c| c.to_string()).collect();
            let line = serde_json::json!({ "id": j.id(), "items": items });
            writeln!(out, "{line}")?;
        }
        out.flush()?;
    }
    fs::rename(tmp, path)
}
