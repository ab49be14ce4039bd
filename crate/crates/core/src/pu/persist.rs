use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::classifier::{KnnModel, LinearModel, Stage2Model};
use super::optim::Convergence;
use super::{Centroid, ClassifierConfig, PuConfig, PuError, PuModel, TrainingMetadata};
use crate::fsutil::{f64_from_le_bytes, f64_to_le_bytes, sha256_hex, write_atomic};
use crate::scalar::{cast_vec, Scalar};

pub const PU_FORMAT_VERSION: u32 = 1;
pub const PU_MANIFEST_FILE: &str = "pu_model.json";
const PARAMS_FILE: &str = "pu_params.f64";

/// Array layout of `pu_params.f64`: both centroids, then the classifier.
/// Linear models store weights then bias; KNN stores its training rows
/// followed by one 0/1 label per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuManifest {
    pub format_version: u32,
    pub config: PuConfig,
    pub classifier_kind: String,
    pub dim: usize,
    pub centroid_p_count: usize,
    pub centroid_u_count: usize,
    /// stored training rows (KNN only)
    pub knn_rows: Option<usize>,
    pub metadata: TrainingMetadata,
    pub files: BTreeMap<String, String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PuError + '_ {
    move |source| PuError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> PuError {
    PuError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

impl<T: Scalar> PuModel<T> {
    fn params(&self) -> Result<(Vec<f64>, Option<usize>), PuError> {
        let mut out: Vec<f64> = cast_vec(&self.centroid_p.vector);
        out.extend(cast_vec::<T, f64>(&self.centroid_u.vector));
        let rows = match &self.classifier {
            Stage2Model::Logistic(m) | Stage2Model::Svm(m) => {
                out.extend(cast_vec::<T, f64>(&m.weights));
                out.push(m.bias.to_f64_lossy());
                None
            }
            Stage2Model::Knn(m) => {
                for row in &m.x {
                    out.extend(cast_vec::<T, f64>(row));
                }
                out.extend(m.y.iter().map(|&y| if y { 1.0 } else { 0.0 }));
                Some(m.x.len())
            }
            Stage2Model::Plugin { name, .. } => {
                return Err(PuError::Plugin(format!("plugin model {name:?} cannot be persisted")))
            }
        };
        Ok((out, rows))
    }

    pub fn manifest(&self) -> Result<PuManifest, PuError> {
        let (params, knn_rows) = self.params()?;
        Ok(self.manifest_for(&f64_to_le_bytes(&params), knn_rows))
    }

    fn manifest_for(&self, bytes: &[u8], knn_rows: Option<usize>) -> PuManifest {
        PuManifest {
            format_version: PU_FORMAT_VERSION,
            config: self.config.clone(),
            classifier_kind: self.config.classifier.kind().to_string(),
            dim: self.dim(),
            centroid_p_count: self.centroid_p.count,
            centroid_u_count: self.centroid_u.count,
            knn_rows,
            metadata: self.metadata.clone(),
            files: BTreeMap::from([(PARAMS_FILE.to_string(), sha256_hex(bytes))]),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<PuManifest, PuError> {
        let (params, knn_rows) = self.params()?;
        let bytes = f64_to_le_bytes(&params);
        let manifest = self.manifest_for(&bytes, knn_rows);
        let p = dir.join(PARAMS_FILE);
        write_atomic(&p, &bytes).map_err(io_err(&p))?;
        let m = dir.join(PU_MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_atomic(&m, json.as_bytes()).map_err(io_err(&m))?;
        Ok(manifest)
    }

    pub fn load(dir: &Path) -> Result<Self, PuError> {
        let mp = dir.join(PU_MANIFEST_FILE);
        let text = std::fs::read_to_string(&mp).map_err(io_err(&mp))?;
        let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| format_err(&mp, e.to_string()))?;
        let version = raw
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| format_err(&mp, "missing format_version"))?;
        if version != PU_FORMAT_VERSION as u64 {
            return Err(PuError::UnsupportedVersion(version as u32));
        }
        let manifest: PuManifest = serde_json::from_value(raw).map_err(|e| format_err(&mp, e.to_string()))?;
        manifest.config.validate()?;

        let pp = dir.join(PARAMS_FILE);
        let bytes = std::fs::read(&pp).map_err(io_err(&pp))?;
        let expected = manifest
            .files
            .get(PARAMS_FILE)
            .ok_or_else(|| format_err(&mp, "manifest does not list the parameter file"))?;
        let found = sha256_hex(&bytes);
        if &found != expected {
            return Err(PuError::HashMismatch {
                what: PARAMS_FILE.into(),
                expected: expected.clone(),
                found,
            });
        }
        let params = f64_from_le_bytes(&bytes).ok_or_else(|| format_err(&pp, "truncated float array"))?;
        let d = manifest.dim;
        let need = |n: usize| -> Result<(), PuError> {
            if params.len() != n {
                Err(format_err(&pp, format!("expected {n} values, found {}", params.len())))
            } else {
                Ok(())
            }
        };
        let centroid_p = Centroid {
            vector: cast_vec(params.get(..d).ok_or_else(|| format_err(&pp, "too short"))?),
            count: manifest.centroid_p_count,
        };
        let centroid_u = Centroid {
            vector: cast_vec(params.get(d..2 * d).ok_or_else(|| format_err(&pp, "too short"))?),
            count: manifest.centroid_u_count,
        };
        let rest = &params[2 * d..];
        let conv = Convergence {
            iterations: manifest.metadata.iterations.unwrap_or(0),
            grad_norm: 0.0,
            converged: manifest.metadata.converged.unwrap_or(true),
        };
        let linear = || -> Result<LinearModel<T>, PuError> {
            need(3 * d + 1)?;
            Ok(LinearModel {
                weights: cast_vec(&rest[..d]),
                bias: T::from_f64_lossy(rest[d]),
                convergence: conv,
            })
        };
        let classifier = match &manifest.config.classifier {
            ClassifierConfig::LogisticRegression { .. } => Stage2Model::Logistic(linear()?),
            ClassifierConfig::LinearSvm { .. } => Stage2Model::Svm(linear()?),
            ClassifierConfig::Knn { k, weights, p } => {
                let rows = manifest
                    .knn_rows
                    .ok_or_else(|| format_err(&mp, "knn model without row count"))?;
                need(2 * d + rows * d + rows)?;
                let x = rest[..rows * d].chunks_exact(d.max(1)).map(cast_vec).collect();
                let y = rest[rows * d..].iter().map(|&v| v > 0.5).collect();
                Stage2Model::Knn(KnnModel {
                    k: *k,
                    weights: *weights,
                    p: *p,
                    x,
                    y,
                })
            }
            ClassifierConfig::Plugin { name } => {
                return Err(PuError::Plugin(format!("plugin model {name:?} cannot be loaded")))
            }
        };
        Ok(PuModel {
            config: manifest.config,
            centroid_p,
            centroid_u,
            classifier,
            metadata: manifest.metadata,
        })
    }
}
