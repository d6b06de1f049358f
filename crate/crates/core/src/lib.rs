//! Zero-shot attribute sub-discrimination over metric-learning embeddings.
//!
//! A face-recognition encoder is trained to separate identities, but its
//! embedding space also arranges samples by attributes it was never asked to
//! learn. This crate clusters such embeddings (K-Means or Gaussian mixtures),
//! aligns anonymous clusters with attribute labels to score them, probes
//! which attributes successive cluster counts resolve first, and persists
//! labeled centroids as a nearest-centroid classifier for unseen vectors.
//!
//! The pipeline, end to end:
//!
//! 1. [`dataset`] — validated embedding records with string attribute labels.
//! 2. [`kmeans`] / [`gmm`] — seeded, deterministic clustering engines.
//! 3. [`align`] — optimal cluster→label alignment, confusion matrices,
//!    multi-run averaging, and the hierarchy probe.
//! 4. [`classifier`] — stratified splits, centroid training/selection,
//!    nearest-centroid classification, and one-shot identity lookup.
//! 5. [`synth`] — synthetic embeddings with a controllable attribute
//!    hierarchy, standing in for private face datasets.
//! 6. [`io`] / [`report`] — JSONL dataset files, versioned classifier
//!    persistence, and run reports.

pub mod align;
pub mod classifier;
pub mod dataset;
pub mod error;
pub mod gmm;
mod hungarian;
pub mod io;
pub mod kmeans;
pub mod metric;
pub mod report;
pub mod synth;

pub use align::{
    align_and_score, average_runs, hierarchy_probe, AlignmentReport, AveragedAccuracies,
    HierarchyLevel, HierarchyReport,
};
pub use classifier::{
    classify, knn_identify, split_dataset, train_centroid_classifier,
    train_centroid_classifier_gmm, CentroidClassifier, CentroidEntry, CentroidTraining,
    Classification, Identification, SplitSpec,
};
pub use dataset::{AttributeSchema, Dataset, EmbeddingRecord};
pub use error::{Error, Result};
pub use gmm::{gmm_fit, gmm_predict, CovarianceKind, GmmConfig, GmmModel};
pub use kmeans::{
    kmeans_fit, kmeans_fit_once, restart_seed, select_best_by_inertia, InitMethod, KMeansConfig,
    KMeansModel,
};
pub use metric::{
    euclidean_distance, mahalanobis_distance, squared_euclidean_distance, MetricKind, MetricSpec,
};
pub use report::RunReport;
pub use synth::{generate, AttributeAxis, Direction, HierarchySpec};
