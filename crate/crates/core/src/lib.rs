//! Place-type aware classification of multi-category 2-D point sets.
//!
//! The crate covers the whole pipeline:
//!
//! - [`data`]: point sets, place-types, the expert distance matrix, dataset files.
//! - [`graph`]: spatial k-nearest-neighbor graphs.
//! - [`network`]: the place-type parameterized message-passing network with
//!   an analytic backward pass and plain SGD.
//! - [`training`]: one-size-fits-all, per-place-type, weighted-distance learning
//!   rate and spatial domain adaptation strategies; routing and evaluation.
//! - [`datagen`]: synthetic planted-motif benchmarks and augmentation.
//! - [`explain`]: permutation importance over spatial relationship features.
//! - [`cli`]: the command implementations behind the `spatial-lucid` binary.

pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod datagen;
pub mod error;
pub mod explain;
pub mod graph;
mod io_util;
pub mod matrix;
pub mod metrics;
pub mod network;
pub mod rng;
pub mod training;

pub use data::{
    load_dataset, save_dataset, validate_distance_matrix, CategoryId, ClassId, Dataset,
    MultiCategoryPointSet, PlaceTypeDistanceMatrix, PlaceTypeId, SpatialPoint,
};
pub use error::{Error, Result};
pub use graph::{build_knn_graph, KnnGraph};
pub use metrics::EvalReport;
pub use network::{ModelConfig, ModelParams, ParamKey};
pub use training::{StrategyConfig, StrategyKind, TrainedEnsemble};
