//! PV-DM paragraph vectors with negative sampling.
//!
//! Every post contributes its id label, one label per tag, and one label for
//! the sorted tag combination. The trained id-label vectors serve as document
//! vectors for training posts; unseen posts get a vector from
//! [`EmbeddingModel::infer_vector`] with all word and output weights frozen.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::preprocess::CleanPost;
use crate::scalar::{dot, Scalar};

mod persist;
mod train;
mod weights;

pub use persist::{EmbeddingManifest, EMBEDDING_FORMAT_VERSION};
pub use train::train_pvdm;

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("invalid embedding config: {0}")]
    InvalidConfig(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("no word occurs at least {min_count} times")]
    EmptyVocabulary { min_count: usize },
    #[error("duplicate document id {0}")]
    DuplicateDoc(u64),
    #[error("uninferable post: no token is in the model vocabulary")]
    Uninferable,
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("vector length mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed model file {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("unsupported embedding format version {0}")]
    UnsupportedVersion(u32),
    #[error("hash mismatch for {what}: expected {expected}, found {found}")]
    HashMismatch {
        what: String,
        expected: String,
        found: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    /// One worker; bit-reproducible for a given seed.
    #[default]
    Deterministic,
    /// Lock-free updates across the rayon pool. Results vary run to run.
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub learning_rate: f32,
    pub min_learning_rate: f32,
    pub min_count: usize,
    pub negative_samples: usize,
    /// defaults to `epochs`
    pub inference_epochs: Option<usize>,
    pub seed: u64,
    pub mode: TrainingMode,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 300,
            window: 5,
            epochs: 20,
            learning_rate: 0.025,
            min_learning_rate: 0.0001,
            min_count: 2,
            negative_samples: 5,
            inference_epochs: None,
            seed: 1,
            mode: TrainingMode::Deterministic,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        let bad = |m: &str| Err(EmbeddingError::InvalidConfig(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.epochs == 0 || self.inference_epochs == Some(0) {
            return bad("epochs must be at least 1");
        }
        if self.negative_samples == 0 {
            return bad("negative_samples must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.min_learning_rate >= 0.0 && self.min_learning_rate <= self.learning_rate) {
            return bad("min_learning_rate must lie in [0, learning_rate]");
        }
        Ok(())
    }

    pub fn inference_epochs(&self) -> usize {
        self.inference_epochs.unwrap_or(self.epochs)
    }
}

/// A trained label: a post id or a tag (single or combined).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LabelKey {
    Doc(u64),
    Tag(String),
}

impl fmt::Display for LabelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelKey::Doc(id) => write!(f, "{id}"),
            LabelKey::Tag(t) => f.write_str(t),
        }
    }
}

/// Labels attached to one post during training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocLabels {
    pub id: u64,
    /// single tags followed by the combined label, without duplicates
    pub tags: Vec<String>,
}

impl DocLabels {
    /// Id label first, then tag labels.
    pub fn keys(&self) -> impl Iterator<Item = LabelKey> + '_ {
        std::iter::once(LabelKey::Doc(self.id)).chain(self.tags.iter().cloned().map(LabelKey::Tag))
    }

    /// All labels as strings, the id rendered in decimal.
    pub fn labels(&self) -> Vec<String> {
        self.keys().map(|k| k.to_string()).collect()
    }
}

pub fn build_doc_labels(post: &CleanPost) -> DocLabels {
    labels_for(post.id, &post.tags)
}

pub fn labels_for(id: u64, tags: &[String]) -> DocLabels {
    let mut sorted: Vec<&str> = tags.iter().map(String::as_str).filter(|t| !t.is_empty()).collect();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out: Vec<String> = sorted.iter().map(|t| t.to_string()).collect();
    if sorted.len() > 1 {
        out.push(sorted.join("_"));
    }
    DocLabels { id, tags: out }
}

/// A training document: normalized tokens and its labels.
#[derive(Debug, Clone, Copy)]
pub struct TrainingDoc<'a> {
    pub tokens: &'a [String],
    pub labels: &'a DocLabels,
}

/// Hashes of the normalization resources a model was trained with.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TextHashes {
    pub stopwords_name: String,
    pub stopwords_sha256: String,
    pub lexicon_sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Vocab {
    pub words: Vec<String>,
    pub counts: Vec<u64>,
    pub index: HashMap<String, u32>,
}

impl Vocab {
    pub fn from_counts(words: Vec<String>, counts: Vec<u64>) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Vocab {
            words,
            counts,
            index,
        }
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().filter_map(|t| self.index.get(t).copied()).collect()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }
}

/// Trained PV-DM model. Immutable; safe to share across threads.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    pub(crate) config: EmbeddingConfig,
    pub(crate) vocab: Vocab,
    pub(crate) word_vectors: Vec<f32>,
    pub(crate) output_weights: Vec<f32>,
    pub(crate) label_vectors: Vec<f32>,
    pub(crate) labels: Vec<LabelKey>,
    pub(crate) label_index: HashMap<LabelKey, usize>,
    pub(crate) epoch_losses: Vec<f64>,
    pub(crate) text_hashes: Option<TextHashes>,
}

impl EmbeddingModel {
    pub fn config(&self) -> &EmbeddingConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = (&str, u64)> {
        self.vocab
            .words
            .iter()
            .map(String::as_str)
            .zip(self.vocab.counts.iter().copied())
    }

    pub fn contains_word(&self, word: &str) -> bool {
        self.vocab.index.contains_key(word)
    }

    pub fn word_vector(&self, word: &str) -> Option<&[f32]> {
        let i = *self.vocab.index.get(word)? as usize;
        let d = self.dim();
        Some(&self.word_vectors[i * d..(i + 1) * d])
    }

    pub fn labels(&self) -> &[LabelKey] {
        &self.labels
    }

    pub fn label_vector(&self, key: &LabelKey) -> Option<&[f32]> {
        let i = *self.label_index.get(key)?;
        let d = self.dim();
        Some(&self.label_vectors[i * d..(i + 1) * d])
    }

    pub fn tag_vector(&self, tag: &str) -> Option<&[f32]> {
        self.label_vector(&LabelKey::Tag(tag.to_string()))
    }

    /// Trained id-label vector of a training post.
    pub fn doc_vector(&self, id: u64) -> Option<&[f32]> {
        self.label_vector(&LabelKey::Doc(id))
    }

    /// Mean negative-sampling loss per predicted word, one entry per epoch.
    pub fn epoch_losses(&self) -> &[f64] {
        &self.epoch_losses
    }

    pub fn text_hashes(&self) -> Option<&TextHashes> {
        self.text_hashes.as_ref()
    }

    pub fn with_text_hashes(mut self, hashes: TextHashes) -> Self {
        self.text_hashes = Some(hashes);
        self
    }

    /// Whether at least one token is in the vocabulary.
    pub fn can_infer(&self, tokens: &[String]) -> bool {
        tokens.iter().any(|t| self.contains_word(t))
    }

    /// Label whose vector is closest (by cosine) to `v`, ties to the
    /// earliest label.
    pub fn nearest_label(&self, v: &[f32]) -> Option<(&LabelKey, f32)> {
        let d = self.dim();
        let mut best: Option<(usize, f32)> = None;
        for (i, row) in self.label_vectors.chunks_exact(d).enumerate() {
            let Ok(dist) = cosine_distance(v, row) else {
                continue;
            };
            if best.map_or(true, |(_, b)| dist < b) {
                best = Some((i, dist));
            }
        }
        best.map(|(i, dist)| (&self.labels[i], dist))
    }
}

/// `1 - cos(a, b)`, in `[0, 2]`.
pub fn cosine_distance<T: Scalar>(a: &[T], b: &[T]) -> Result<T, EmbeddingError> {
    if a.len() != b.len() {
        return Err(EmbeddingError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == T::zero() || nb == T::zero() || !na.is_finite() || !nb.is_finite() {
        return Err(EmbeddingError::ZeroNorm);
    }
    let two = T::one() + T::one();
    let d = T::one() - dot(a, b) / (na * nb);
    Ok(d.max(T::zero()).min(two))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn combined_label_is_sorted() {
        let a = labels_for(3, &tags(&["php", "security"]));
        let b = labels_for(3, &tags(&["security", "php"]));
        assert_eq!(a, b);
        assert_eq!(a.labels(), vec!["3", "php", "security", "php_security"]);
    }

    #[test]
    fn single_tag_has_no_combination() {
        assert_eq!(labels_for(9, &tags(&["php"])).labels(), vec!["9", "php"]);
        assert_eq!(labels_for(9, &tags(&["php", "php"])).labels(), vec!["9", "php"]);
    }

    #[test]
    fn cosine_examples() {
        assert!(cosine_distance(&[1.0f64, 0.0], &[0.0, 1.0]).unwrap() - 1.0 < 1e-15);
        assert_eq!(cosine_distance(&[1.0f64, 0.0], &[-1.0, 0.0]).unwrap(), 2.0);
        assert_eq!(cosine_distance(&[0.3f32, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert!(matches!(
            cosine_distance(&[0.0f64, 0.0], &[1.0, 0.0]),
            Err(EmbeddingError::ZeroNorm)
        ));
        assert!(cosine_distance(&[1.0f64], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(EmbeddingConfig::default().validate().is_ok());
        let bad = EmbeddingConfig {
            window: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EmbeddingConfig {
            dim: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
