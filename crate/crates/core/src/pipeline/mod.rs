//! File-based stages: label, cross-validate, train, predict, evaluate,
//! plus corpus statistics and PCA export.

mod commands;
mod config;
mod features;
mod manifest;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::embedding::EmbeddingError;
use crate::evaluation::EvalError;
use crate::heuristics::HeuristicsError;
use crate::ingest::IngestError;
use crate::preprocess::PreprocessError;
use crate::pu::PuError;

pub use commands::{
    crossval, evaluate, label, load_labelled, load_model, pca, predict, read_posts, stats, train, CrossvalReport,
    CrossvalRow, EvalMode, LabelSummary, LabelledCorpus, LoadedModel, PcaSummary, PredictRow, PredictSummary,
    TextContext, TrainSummary, BEST_CONFIG_FILE, CV_REPORT_FILE, LABELS_FILE, POSTS_FILE, PREDICTIONS_FILE,
};
pub use config::{CvSection, DocFeatures, InputConfig, InputFormat, PipelineConfig, PuSection, TextConfig};
pub use features::{
    decide_all, document_vectors, infer_seed, inferred_vectors, split_pu, train_embedding, PuFoldTrainer,
};
pub use manifest::{FileHash, RunManifest, RunRecorder, StageTiming, RUN_MANIFEST_FILE};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Heuristics(#[from] HeuristicsError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Pu(#[from] PuError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Degenerate(String),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 usage, 2 input, 3 degenerate model.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => 1,
            PipelineError::Degenerate(_) | PipelineError::Pu(PuError::DegenerateStage1(_)) => 3,
            _ => 2,
        }
    }
}
