use std::sync::Arc;

use super::config::DocFeatures;
use crate::embedding::{build_doc_labels, train_pvdm, EmbeddingConfig, EmbeddingError, EmbeddingModel, TrainingDoc};
use crate::evaluation::{EvalError, FoldFailure, FoldTrainer};
use crate::preprocess::CleanPost;
use crate::pu::{train_pu, ClassifierPlugin, Decision, PuConfig, PuError, PuModel};

/// Seed of the inference run for one post.
pub fn infer_seed(seed: u64, post_id: u64) -> u64 {
    seed ^ post_id.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn train_embedding(posts: &[&CleanPost], config: &EmbeddingConfig) -> Result<EmbeddingModel, EmbeddingError> {
    let labels: Vec<_> = posts.iter().map(|p| build_doc_labels(p)).collect();
    let docs: Vec<TrainingDoc> = posts
        .iter()
        .zip(&labels)
        .map(|(p, l)| TrainingDoc {
            tokens: &p.tokens,
            labels: l,
        })
        .collect();
    train_pvdm(&docs, config)
}

/// Vector of every post, `None` when no token is in the vocabulary.
pub fn document_vectors(
    model: &EmbeddingModel,
    posts: &[&CleanPost],
    features: DocFeatures,
    seed: u64,
) -> Result<Vec<Option<Vec<f64>>>, EmbeddingError> {
    posts
        .iter()
        .map(|p| {
            if !model.can_infer(&p.tokens) {
                return Ok(None);
            }
            let v = match features {
                DocFeatures::IdLabel => model.doc_vector(p.id).map(<[f32]>::to_vec),
                DocFeatures::Inferred => None,
            };
            let v = match v {
                Some(v) => v,
                None => model.infer_vector(&p.tokens, infer_seed(seed, p.id))?,
            };
            Ok(Some(v.into_iter().map(f64::from).collect()))
        })
        .collect()
}

/// Inferred vectors for posts that were not part of training.
pub fn inferred_vectors(model: &EmbeddingModel, posts: &[&CleanPost], seed: u64) -> Result<Vec<Option<Vec<f64>>>, EmbeddingError> {
    document_vectors(model, posts, DocFeatures::Inferred, seed)
}

/// P and U training sets, skipping posts without a vector.
pub fn split_pu(vectors: &[Option<Vec<f64>>], labelled: &[bool]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut p = Vec::new();
    let mut u = Vec::new();
    for (v, &l) in vectors.iter().zip(labelled) {
        if let Some(v) = v {
            if l {
                p.push(v.clone());
            } else {
                u.push(v.clone());
            }
        }
    }
    (p, u)
}

/// Uninferable posts count as not predicted positive.
pub fn decide_all(model: &PuModel<f64>, vectors: &[Option<Vec<f64>>], threshold: f64) -> Vec<bool> {
    vectors
        .iter()
        .map(|v| {
            v.as_ref()
                .is_some_and(|v| model.decide(v, threshold).0 == Decision::Security)
        })
        .collect()
}

/// Cross-validation fold: an embedding trained on the training folds only,
/// shared by every PU configuration.
pub struct PuFoldTrainer<'a> {
    pub posts: &'a [CleanPost],
    pub labelled: &'a [bool],
    pub embedding: EmbeddingConfig,
    pub features: DocFeatures,
    pub seed: u64,
    pub threshold: f64,
    pub plugins: Vec<Arc<dyn ClassifierPlugin<f64>>>,
}

impl FoldTrainer for PuFoldTrainer<'_> {
    type Config = PuConfig;

    fn run_fold(
        &self,
        fold: usize,
        train: &[usize],
        validation: &[usize],
        configs: &[PuConfig],
    ) -> Result<Vec<Result<Vec<bool>, FoldFailure>>, EvalError> {
        let fold_err = |e: &dyn std::fmt::Display| EvalError::Fold {
            fold,
            message: e.to_string(),
        };
        let mut cfg = self.embedding.clone();
        cfg.seed = cfg.seed.wrapping_add(fold as u64 + 1);
        let train_posts: Vec<&CleanPost> = train.iter().map(|&i| &self.posts[i]).collect();
        let model = train_embedding(&train_posts, &cfg).map_err(|e| fold_err(&e))?;
        let train_vecs = document_vectors(&model, &train_posts, self.features, self.seed).map_err(|e| fold_err(&e))?;
        let labelled: Vec<bool> = train.iter().map(|&i| self.labelled[i]).collect();
        let (p, u) = split_pu(&train_vecs, &labelled);
        let val_posts: Vec<&CleanPost> = validation.iter().map(|&i| &self.posts[i]).collect();
        let val_vecs = inferred_vectors(&model, &val_posts, self.seed).map_err(|e| fold_err(&e))?;

        Ok(configs
            .iter()
            .map(|c| match train_pu(&p, &u, c, &self.plugins) {
                Ok(m) => Ok(decide_all(&m, &val_vecs, self.threshold)),
                Err(PuError::DegenerateStage1(d)) => Err(FoldFailure::Degenerate(d.to_string())),
                Err(e) => Err(FoldFailure::Error(e.to_string())),
            })
            .collect())
    }
}
