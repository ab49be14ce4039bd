//! Metrics for PU and fully labelled evaluation, cross-validated model
//! selection, rank tests and PCA projection.

mod cv;
mod metrics;
mod pca;
mod stats;

use thiserror::Error;

pub use cv::{
    mean_metrics, stratified_folds, stratified_kfold_cv, ConfigResult, ConfigStatus, CvOutcome, CvPlan, FoldFailure,
    FoldOutcome, FoldTrainer, SelectionMetric,
};
pub use metrics::{
    gmean_scale, pn_metrics, pu_metrics, ConfusionPn, ConfusionPu, MetricsReport, PnMetrics, PuEvalConfig, PuMetrics,
};
pub use pca::{project_pca, projection_csv, symmetric_eigen, Projection};
pub use stats::{cohens_d, mann_whitney_u, midranks, Alternative, MannWhitney, EXACT_LIMIT};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid confusion counts: {0}")]
    InvalidConfusion(String),
    #[error("{0}")]
    InvalidParameter(String),
    #[error("sample {0} is empty")]
    EmptySample(String),
    #[error("pooled standard deviation is zero")]
    ZeroVariance,
    #[error("data has rank {rank}, fewer than the {components} requested components")]
    RankDeficient { rank: usize, components: usize },
    #[error("stratum {stratum:?} has {size} examples, fewer than k = {k}")]
    StratumTooSmall { stratum: String, size: usize, k: usize },
    #[error("fold {fold}: {message}")]
    Fold { fold: usize, message: String },
}
