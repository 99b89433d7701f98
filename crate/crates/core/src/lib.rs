//! Staged customer-journey analytics.
//!
//! Journeys are validated into three stages (pre-purchase search, pre-purchase
//! evaluation, purchase outcome) and compared with a stage-weighted edit
//! distance. On top of the distance sit k-medoids prototypes, a classical MDS
//! map, k-NN outcome prediction and counterfactual journey selection.

pub mod clustering;
pub mod counterfactual;
pub mod distance;
pub mod embedding;
pub mod error;
pub mod fixture;
pub mod ingest;
pub mod model;
pub mod prediction;
pub mod svg;

pub use clustering::{kmedoids, silhouette, ClusteringResult};
pub use counterfactual::{edit_script, explain_batch, find_counterfactual, CfQuery, CfResult, EditScript};
pub use distance::{distance_matrix, DistanceConfig, DistanceMatrix, Kernel, StageMask, StageWeights};
pub use embedding::{mds, Embedding};
pub use error::{Error, Result};
pub use ingest::{cleanse, read_dataset, validate, CleansingReport, Format, RawRecord};
pub use model::{Dataset, ItemCode, Journey, Outcome, Stage, Symbol};
pub use prediction::{evaluate, KnnModel};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
