//! Two-stage PU classifier: centroid-based reliable-negative selection,
//! then a binary classifier over positives vs reliable negatives.

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_distance, EmbeddingError, EmbeddingModel};
use crate::scalar::{cast_vec, Scalar};

pub mod classifier;
pub mod optim;
mod persist;

pub use classifier::{
    fit_classifier, logistic_objective, squared_hinge_objective, BinaryScorer, ClassifierConfig,
    ClassifierPlugin, KnnModel, KnnWeights, LinearModel, Stage2Model,
};
pub use persist::{PuManifest, PU_FORMAT_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum PuError {
    #[error("{0} set is empty")]
    EmptySet(&'static str),
    #[error("vector length mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vector {index} has zero norm")]
    ZeroNorm { index: usize },
    #[error("degenerate stage 1: {0}")]
    DegenerateStage1(Box<Stage1Diagnostics>),
    #[error("no {0} examples to train on")]
    ClassAbsent(&'static str),
    #[error("invalid PU config: {0}")]
    InvalidConfig(String),
    #[error("plugin error: {0}")]
    Plugin(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed model file {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("unsupported PU model format version {0}")]
    UnsupportedVersion(u32),
    #[error("hash mismatch for {what}: expected {expected}, found {found}")]
    HashMismatch {
        what: String,
        expected: String,
        found: String,
    },
}

/// Mean of a set of vectors with the number of members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroid<T> {
    pub vector: Vec<T>,
    pub count: usize,
}

fn check_dims<T>(vectors: &[Vec<T>], dim: usize) -> Result<(), PuError> {
    match vectors.iter().find(|v| v.len() != dim) {
        Some(v) => Err(PuError::DimensionMismatch {
            expected: dim,
            found: v.len(),
        }),
        None => Ok(()),
    }
}

impl<T: Scalar> Centroid<T> {
    pub fn from_vectors(vectors: &[Vec<T>], what: &'static str) -> Result<Self, PuError> {
        let first = vectors.first().ok_or(PuError::EmptySet(what))?;
        check_dims(vectors, first.len())?;
        let mut sum = vec![T::zero(); first.len()];
        for v in vectors {
            for (s, &x) in sum.iter_mut().zip(v) {
                *s += x;
            }
        }
        let n = T::from_usize(vectors.len()).expect("count fits");
        Ok(Centroid {
            vector: sum.into_iter().map(|s| s / n).collect(),
            count: vectors.len(),
        })
    }

    /// `(c * N + sum(new)) / (N + |new|)` in O(|new|).
    pub fn updated(&self, new_vectors: &[Vec<T>]) -> Result<Self, PuError> {
        if new_vectors.is_empty() {
            return Err(PuError::EmptySet("new vectors"));
        }
        check_dims(new_vectors, self.vector.len())?;
        let n_old = T::from_usize(self.count).expect("count fits");
        let mut acc: Vec<T> = self.vector.iter().map(|&c| c * n_old).collect();
        for v in new_vectors {
            for (a, &x) in acc.iter_mut().zip(v) {
                *a += x;
            }
        }
        let count = self.count + new_vectors.len();
        let n = T::from_usize(count).expect("count fits");
        Ok(Centroid {
            vector: acc.into_iter().map(|a| a / n).collect(),
            count,
        })
    }
}

pub fn compute_centroids<T: Scalar>(p: &[Vec<T>], u: &[Vec<T>]) -> Result<(Centroid<T>, Centroid<T>), PuError> {
    let cp = Centroid::from_vectors(p, "positive")?;
    let cu = Centroid::from_vectors(u, "unlabelled")?;
    if cp.vector.len() != cu.vector.len() {
        return Err(PuError::DimensionMismatch {
            expected: cp.vector.len(),
            found: cu.vector.len(),
        });
    }
    Ok((cp, cu))
}

pub fn update_centroid_incremental<T: Scalar>(old: &Centroid<T>, new_vectors: &[Vec<T>]) -> Result<Centroid<T>, PuError> {
    old.updated(new_vectors)
}

/// Positive and unlabelled vectors with the stage-1 selection.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSplit<T> {
    pub p: Vec<Vec<T>>,
    pub u: Vec<Vec<T>>,
    /// indices into `u`
    pub rn: Vec<usize>,
}

/// Cosine distances of each unlabelled vector to both centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Distances<T> {
    pub to_unlabelled: Vec<T>,
    pub to_positive: Vec<T>,
}

impl<T: Scalar> Stage1Distances<T> {
    pub fn compute(u: &[Vec<T>], centroid_p: &Centroid<T>, centroid_u: &Centroid<T>) -> Result<Self, PuError> {
        let mut to_unlabelled = Vec::with_capacity(u.len());
        let mut to_positive = Vec::with_capacity(u.len());
        for (index, x) in u.iter().enumerate() {
            let map = |e: EmbeddingError| match e {
                EmbeddingError::ZeroNorm => PuError::ZeroNorm { index },
                EmbeddingError::DimensionMismatch { left, right } => PuError::DimensionMismatch {
                    expected: right,
                    found: left,
                },
                other => PuError::Embedding(other),
            };
            to_unlabelled.push(cosine_distance(x, &centroid_u.vector).map_err(map)?);
            to_positive.push(cosine_distance(x, &centroid_p.vector).map_err(map)?);
        }
        Ok(Stage1Distances {
            to_unlabelled,
            to_positive,
        })
    }

    /// Indices with `d(x, c_U) < alpha * d(x, c_P)`.
    pub fn select(&self, alpha: f64) -> Vec<usize> {
        let a = T::from_f64_lossy(alpha);
        self.to_unlabelled
            .iter()
            .zip(&self.to_positive)
            .enumerate()
            .filter(|(_, (&du, &dp))| du < a * dp)
            .map(|(i, _)| i)
            .collect()
    }

    /// Histogram of `d(x, c_U) - d(x, c_P)` over ten bins spanning `[-2, 2]`.
    pub fn histogram(&self) -> Vec<(f64, usize)> {
        let mut bins = vec![0usize; 10];
        for (du, dp) in self.to_unlabelled.iter().zip(&self.to_positive) {
            let diff = du.to_f64_lossy() - dp.to_f64_lossy();
            let b = (((diff + 2.0) / 0.4).floor() as isize).clamp(0, 9) as usize;
            bins[b] += 1;
        }
        bins.into_iter()
            .enumerate()
            .map(|(i, n)| (-2.0 + 0.4 * (i + 1) as f64, n))
            .collect()
    }
}

/// Why stage 1 was rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Diagnostics {
    pub alpha: f64,
    pub selected: usize,
    pub unlabelled: usize,
    pub required: usize,
    /// `(upper bin edge, count)` of `d(x, c_U) - d(x, c_P)`
    pub histogram: Vec<(f64, usize)>,
}

impl fmt::Display for Stage1Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "alpha {} selected {} of {} unlabelled posts, at least {} required; d_U - d_P histogram:",
            self.alpha, self.selected, self.unlabelled, self.required
        )?;
        for (edge, n) in &self.histogram {
            write!(f, " <{edge:.1}:{n}")?;
        }
        Ok(())
    }
}

/// Reliable negatives drawn from `U`, rejected when fewer than
/// `min_rn_fraction * |U|`.
pub fn select_reliable_negatives<T: Scalar>(
    distances: &Stage1Distances<T>,
    alpha: f64,
    min_rn_fraction: f64,
) -> Result<Vec<usize>, PuError> {
    let rn = distances.select(alpha);
    let n_u = distances.to_unlabelled.len();
    let required = (min_rn_fraction * n_u as f64).ceil() as usize;
    if rn.len() < required.max(1) {
        return Err(PuError::DegenerateStage1(Box::new(Stage1Diagnostics {
            alpha,
            selected: rn.len(),
            unlabelled: n_u,
            required: required.max(1),
            histogram: distances.histogram(),
        })));
    }
    Ok(rn)
}

pub const DEFAULT_MIN_RN_FRACTION: f64 = 0.05;

fn default_min_rn_fraction() -> f64 {
    DEFAULT_MIN_RN_FRACTION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuConfig {
    pub alpha: f64,
    pub classifier: ClassifierConfig,
    #[serde(default = "default_min_rn_fraction")]
    pub min_rn_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

impl PuConfig {
    pub fn new(alpha: f64, classifier: ClassifierConfig) -> Self {
        PuConfig {
            alpha,
            classifier,
            min_rn_fraction: DEFAULT_MIN_RN_FRACTION,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), PuError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(PuError::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.min_rn_fraction) {
            return Err(PuError::InvalidConfig("min_rn_fraction must lie in [0, 1]".into()));
        }
        self.classifier.validate()
    }
}

impl fmt::Display for PuConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "alpha={} {}", self.alpha, self.classifier)
    }
}

/// Hyperparameter grid; configurations are enumerated alpha-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PuGrid {
    pub alphas: Vec<f64>,
    pub classifiers: Vec<ClassifierConfig>,
    pub min_rn_fraction: f64,
}

pub const DEFAULT_ALPHAS: [f64; 5] = [1.0, 1.1, 1.2, 0.8, 0.9];
pub const DEFAULT_C_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_K_GRID: [usize; 3] = [11, 31, 51];

impl Default for PuGrid {
    /// Alphas at or above 1 come first so they win ties in ranking.
    fn default() -> Self {
        let mut classifiers = Vec::new();
        classifiers.extend(DEFAULT_C_GRID.iter().map(|&c| ClassifierConfig::logistic(c)));
        classifiers.extend(DEFAULT_C_GRID.iter().map(|&c| ClassifierConfig::svm(c)));
        for &k in &DEFAULT_K_GRID {
            for w in [KnnWeights::Uniform, KnnWeights::Distance] {
                for p in [1, 2] {
                    classifiers.push(ClassifierConfig::knn(k, w, p));
                }
            }
        }
        PuGrid {
            alphas: DEFAULT_ALPHAS.to_vec(),
            classifiers,
            min_rn_fraction: DEFAULT_MIN_RN_FRACTION,
        }
    }
}

impl PuGrid {
    pub fn configs(&self, seed: u64) -> Vec<PuConfig> {
        self.alphas
            .iter()
            .flat_map(|&alpha| {
                self.classifiers.iter().map(move |c| PuConfig {
                    alpha,
                    classifier: c.clone(),
                    min_rn_fraction: self.min_rn_fraction,
                    seed,
                })
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), PuError> {
        if self.alphas.is_empty() || self.classifiers.is_empty() {
            return Err(PuError::InvalidConfig("grid is empty".into()));
        }
        for c in self.configs(0) {
            c.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    /// all of U used as negatives
    pub baseline: bool,
    pub positives: usize,
    pub unlabelled: usize,
    pub reliable_negatives: usize,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    /// content hash of the embedding the vectors came from
    pub embedding_hash: Option<String>,
}

/// Trained two-stage model. Immutable after training.
#[derive(Debug, Clone)]
pub struct PuModel<T: Scalar> {
    pub config: PuConfig,
    pub centroid_p: Centroid<T>,
    pub centroid_u: Centroid<T>,
    pub classifier: Stage2Model<T>,
    pub metadata: TrainingMetadata,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Security,
    NonSecurity,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Security => "security",
            Decision::NonSecurity => "non_security",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction<T> {
    Known { decision: Decision, score: T },
    /// no token of the post is in the embedding vocabulary
    Unknown,
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

fn stage2<T: Scalar>(
    p: &[Vec<T>],
    negatives: Vec<&Vec<T>>,
    config: &PuConfig,
    plugins: &[Arc<dyn ClassifierPlugin<T>>],
) -> Result<Stage2Model<T>, PuError> {
    if p.is_empty() {
        return Err(PuError::ClassAbsent("positive"));
    }
    if negatives.is_empty() {
        return Err(PuError::ClassAbsent("negative"));
    }
    let mut x: Vec<Vec<T>> = p.to_vec();
    x.extend(negatives.into_iter().cloned());
    let mut y = vec![true; p.len()];
    y.resize(x.len(), false);
    classifier::fit_classifier(&config.classifier, &x, &y, config.seed, plugins)
}

/// Stage 2 on `P` vs the reliable negatives `split.rn`.
pub fn train_stage2<T: Scalar>(
    split: &TrainingSplit<T>,
    centroids: (Centroid<T>, Centroid<T>),
    config: &PuConfig,
    plugins: &[Arc<dyn ClassifierPlugin<T>>],
) -> Result<PuModel<T>, PuError> {
    config.validate()?;
    let negatives = split.rn.iter().map(|&i| &split.u[i]).collect();
    let classifier = stage2(&split.p, negatives, config, plugins)?;
    let conv = classifier.convergence();
    Ok(PuModel {
        config: config.clone(),
        centroid_p: centroids.0,
        centroid_u: centroids.1,
        metadata: TrainingMetadata {
            baseline: false,
            positives: split.p.len(),
            unlabelled: split.u.len(),
            reliable_negatives: split.rn.len(),
            converged: conv.map(|c| c.converged),
            iterations: conv.map(|c| c.iterations),
            embedding_hash: None,
        },
        classifier,
    })
}

/// Both stages: centroids, reliable negatives at `config.alpha`, classifier.
pub fn train_pu<T: Scalar>(
    p: &[Vec<T>],
    u: &[Vec<T>],
    config: &PuConfig,
    plugins: &[Arc<dyn ClassifierPlugin<T>>],
) -> Result<PuModel<T>, PuError> {
    config.validate()?;
    let (cp, cu) = compute_centroids(p, u)?;
    let distances = Stage1Distances::compute(u, &cp, &cu)?;
    let rn = select_reliable_negatives(&distances, config.alpha, config.min_rn_fraction)?;
    let split = TrainingSplit {
        p: p.to_vec(),
        u: u.to_vec(),
        rn,
    };
    train_stage2(&split, (cp, cu), config, plugins)
}

/// Pseudo-negative baseline: every unlabelled vector is a negative.
pub fn train_ppn_baseline<T: Scalar>(
    p: &[Vec<T>],
    u: &[Vec<T>],
    config: &PuConfig,
    plugins: &[Arc<dyn ClassifierPlugin<T>>],
) -> Result<PuModel<T>, PuError> {
    config.validate()?;
    let (cp, cu) = compute_centroids(p, u)?;
    let classifier = stage2(p, u.iter().collect(), config, plugins)?;
    let conv = classifier.convergence();
    Ok(PuModel {
        config: config.clone(),
        centroid_p: cp,
        centroid_u: cu,
        metadata: TrainingMetadata {
            baseline: true,
            positives: p.len(),
            unlabelled: u.len(),
            reliable_negatives: u.len(),
            converged: conv.map(|c| c.converged),
            iterations: conv.map(|c| c.iterations),
            embedding_hash: None,
        },
        classifier,
    })
}

impl<T: Scalar> PuModel<T> {
    pub fn dim(&self) -> usize {
        self.centroid_p.vector.len()
    }

    pub fn with_embedding_hash(mut self, hash: String) -> Self {
        self.metadata.embedding_hash = Some(hash);
        self
    }

    pub fn score(&self, x: &[T]) -> T {
        self.classifier.score(x)
    }

    /// Score at or above `threshold` is Security.
    pub fn decide(&self, x: &[T], threshold: f64) -> (Decision, T) {
        let s = self.score(x);
        let d = if s >= T::from_f64_lossy(threshold) {
            Decision::Security
        } else {
            Decision::NonSecurity
        };
        (d, s)
    }

    /// Infers a vector for `tokens` and classifies it. Tags play no part.
    pub fn predict(
        &self,
        embedding: &EmbeddingModel,
        tokens: &[String],
        seed: u64,
        threshold: f64,
    ) -> Result<Prediction<T>, PuError> {
        if embedding.dim() != self.dim() {
            return Err(PuError::DimensionMismatch {
                expected: self.dim(),
                found: embedding.dim(),
            });
        }
        match embedding.infer_vector(tokens, seed) {
            Ok(v) => {
                let (decision, score) = self.decide(&cast_vec::<f32, T>(&v), threshold);
                Ok(Prediction::Known { decision, score })
            }
            Err(EmbeddingError::Uninferable) => Ok(Prediction::Unknown),
            Err(e) => Err(e.into()),
        }
    }
}
