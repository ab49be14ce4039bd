use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EmbeddingConfig, EmbeddingError, EmbeddingModel, LabelKey, TextHashes, Vocab};
use crate::fsutil::{f32_from_le_bytes, f32_to_le_bytes, sha256_hex, write_atomic};

pub const EMBEDDING_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "embedding.json";
const VOCAB_FILE: &str = "vocab.txt";
const LABELS_FILE: &str = "labels.txt";
const WORDS_FILE: &str = "word_vectors.f32";
const LABEL_VECTORS_FILE: &str = "label_vectors.f32";
const OUTPUT_FILE: &str = "output_weights.f32";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingManifest {
    pub format_version: u32,
    pub config: EmbeddingConfig,
    pub vocab_size: usize,
    pub label_count: usize,
    pub vocab_sha256: String,
    pub text_hashes: Option<TextHashes>,
    pub epoch_losses: Vec<f64>,
    /// file name → sha256
    pub files: BTreeMap<String, String>,
    /// digest over the config and every file digest
    pub content_sha256: String,
}

struct Encoded {
    files: Vec<(&'static str, Vec<u8>)>,
}

fn encode(model: &EmbeddingModel) -> Encoded {
    let mut vocab = String::new();
    for (w, c) in model.vocabulary() {
        vocab.push_str(&format!("{w}\t{c}\n"));
    }
    let mut labels = String::new();
    for key in &model.labels {
        match key {
            LabelKey::Doc(id) => labels.push_str(&format!("doc\t{id}\n")),
            LabelKey::Tag(t) => labels.push_str(&format!("tag\t{t}\n")),
        }
    }
    Encoded {
        files: vec![
            (VOCAB_FILE, vocab.into_bytes()),
            (LABELS_FILE, labels.into_bytes()),
            (WORDS_FILE, f32_to_le_bytes(&model.word_vectors)),
            (LABEL_VECTORS_FILE, f32_to_le_bytes(&model.label_vectors)),
            (OUTPUT_FILE, f32_to_le_bytes(&model.output_weights)),
        ],
    }
}

fn content_digest(config: &EmbeddingConfig, files: &BTreeMap<String, String>) -> String {
    let mut buf = serde_json::to_string(config).expect("config serializes");
    for (name, hash) in files {
        buf.push('\n');
        buf.push_str(name);
        buf.push(' ');
        buf.push_str(hash);
    }
    sha256_hex(buf.as_bytes())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EmbeddingError + '_ {
    move |source| EmbeddingError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> EmbeddingError {
    EmbeddingError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

impl EmbeddingModel {
    pub fn manifest(&self) -> EmbeddingManifest {
        let enc = encode(self);
        let files: BTreeMap<String, String> = enc
            .files
            .iter()
            .map(|(n, b)| (n.to_string(), sha256_hex(b)))
            .collect();
        EmbeddingManifest {
            format_version: EMBEDDING_FORMAT_VERSION,
            config: self.config.clone(),
            vocab_size: self.vocab.len(),
            label_count: self.labels.len(),
            vocab_sha256: files[VOCAB_FILE].clone(),
            text_hashes: self.text_hashes.clone(),
            epoch_losses: self.epoch_losses.clone(),
            content_sha256: content_digest(&self.config, &files),
            files,
        }
    }

    /// Identifies the trained weights; PU models record it.
    pub fn content_hash(&self) -> String {
        self.manifest().content_sha256
    }

    /// Writes the manifest and weight files into `dir`.
    pub fn save(&self, dir: &Path) -> Result<EmbeddingManifest, EmbeddingError> {
        let enc = encode(self);
        for (name, bytes) in &enc.files {
            let p = dir.join(name);
            write_atomic(&p, bytes).map_err(io_err(&p))?;
        }
        let manifest = self.manifest();
        let p = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_atomic(&p, json.as_bytes()).map_err(io_err(&p))?;
        Ok(manifest)
    }

    /// Loads a model saved by [`EmbeddingModel::save`], verifying every file
    /// digest.
    pub fn load(dir: &Path) -> Result<EmbeddingModel, EmbeddingError> {
        let mp = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&mp).map_err(io_err(&mp))?;
        let raw: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| format_err(&mp, e.to_string()))?;
        let version = raw
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| format_err(&mp, "missing format_version"))?;
        if version != EMBEDDING_FORMAT_VERSION as u64 {
            return Err(EmbeddingError::UnsupportedVersion(version as u32));
        }
        let manifest: EmbeddingManifest =
            serde_json::from_value(raw).map_err(|e| format_err(&mp, e.to_string()))?;
        manifest.config.validate()?;

        let mut read = HashMap::new();
        for (name, expected) in &manifest.files {
            let p = dir.join(name);
            let bytes = std::fs::read(&p).map_err(io_err(&p))?;
            let found = sha256_hex(&bytes);
            if &found != expected {
                return Err(EmbeddingError::HashMismatch {
                    what: name.clone(),
                    expected: expected.clone(),
                    found,
                });
            }
            read.insert(name.as_str(), (p, bytes));
        }
        let expected = content_digest(&manifest.config, &manifest.files);
        if expected != manifest.content_sha256 {
            return Err(EmbeddingError::HashMismatch {
                what: "content".into(),
                expected: manifest.content_sha256.clone(),
                found: expected,
            });
        }
        let take = |name: &str| {
            read.get(name)
                .ok_or_else(|| format_err(dir, format!("manifest does not list {name}")))
        };
        let dim = manifest.config.dim;

        let (vp, vbytes) = take(VOCAB_FILE)?;
        let vtext = std::str::from_utf8(vbytes).map_err(|e| format_err(vp, e.to_string()))?;
        let mut words = Vec::new();
        let mut counts = Vec::new();
        for (i, line) in vtext.lines().enumerate() {
            let (w, c) = line
                .rsplit_once('\t')
                .ok_or_else(|| format_err(vp, format!("line {}: expected word<TAB>count", i + 1)))?;
            let c: u64 = c
                .parse()
                .map_err(|_| format_err(vp, format!("line {}: bad count", i + 1)))?;
            words.push(w.to_string());
            counts.push(c);
        }

        let (lp, lbytes) = take(LABELS_FILE)?;
        let ltext = std::str::from_utf8(lbytes).map_err(|e| format_err(lp, e.to_string()))?;
        let mut labels = Vec::new();
        for (i, line) in ltext.lines().enumerate() {
            let key = match line.split_once('\t') {
                Some(("doc", id)) => LabelKey::Doc(
                    id.parse()
                        .map_err(|_| format_err(lp, format!("line {}: bad id", i + 1)))?,
                ),
                Some(("tag", t)) => LabelKey::Tag(t.to_string()),
                _ => return Err(format_err(lp, format!("line {}: bad label", i + 1))),
            };
            labels.push(key);
        }

        let floats = |name: &str, rows: usize| -> Result<Vec<f32>, EmbeddingError> {
            let (p, bytes) = take(name)?;
            let v = f32_from_le_bytes(bytes).ok_or_else(|| format_err(p, "truncated float array"))?;
            if v.len() != rows * dim {
                return Err(format_err(
                    p,
                    format!("expected {} floats, found {}", rows * dim, v.len()),
                ));
            }
            Ok(v)
        };
        let word_vectors = floats(WORDS_FILE, words.len())?;
        let output_weights = floats(OUTPUT_FILE, words.len())?;
        let label_vectors = floats(LABEL_VECTORS_FILE, labels.len())?;
        let label_index = labels
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i))
            .collect();

        Ok(EmbeddingModel {
            config: manifest.config,
            vocab: Vocab::from_counts(words, counts),
            word_vectors,
            output_weights,
            label_vectors,
            labels,
            label_index,
            epoch_losses: manifest.epoch_losses,
            text_hashes: manifest.text_hashes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{labels_for, train_pvdm, TrainingDoc};

    fn model() -> EmbeddingModel {
        let toks: Vec<Vec<String>> = (0..6)
            .map(|i| {
                ["alpha", "beta", "gamma", "delta"]
                    .iter()
                    .cycle()
                    .skip(i)
                    .take(12)
                    .map(|s| s.to_string())
                    .collect()
            })
            .collect();
        let labels: Vec<_> = (0..6u64)
            .map(|i| labels_for(i, &["t".to_string(), format!("u{}", i % 2)]))
            .collect();
        let docs: Vec<_> = toks
            .iter()
            .zip(&labels)
            .map(|(tokens, labels)| TrainingDoc { tokens, labels })
            .collect();
        let cfg = EmbeddingConfig {
            dim: 8,
            epochs: 2,
            ..Default::default()
        };
        train_pvdm(&docs, &cfg).unwrap()
    }

    #[test]
    fn save_load_round_trip() {
        let m = model();
        let dir = tempfile::tempdir().unwrap();
        let manifest = m.save(dir.path()).unwrap();
        let back = EmbeddingModel::load(dir.path()).unwrap();
        assert_eq!(back.word_vectors, m.word_vectors);
        assert_eq!(back.label_vectors, m.label_vectors);
        assert_eq!(back.labels, m.labels);
        assert_eq!(back.content_hash(), manifest.content_sha256);
        let t = vec!["alpha".to_string(), "beta".to_string()];
        assert_eq!(back.infer_vector(&t, 1).unwrap(), m.infer_vector(&t, 1).unwrap());
    }

    #[test]
    fn tampered_file_is_rejected() {
        let m = model();
        let dir = tempfile::tempdir().unwrap();
        m.save(dir.path()).unwrap();
        let p = dir.path().join(WORDS_FILE);
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[0] ^= 1;
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(
            EmbeddingModel::load(dir.path()),
            Err(EmbeddingError::HashMismatch { .. })
        ));
    }

    #[test]
    fn unknown_version_is_rejected() {
        let m = model();
        let dir = tempfile::tempdir().unwrap();
        m.save(dir.path()).unwrap();
        let p = dir.path().join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&p).unwrap();
        std::fs::write(&p, text.replace("\"format_version\": 1", "\"format_version\": 9")).unwrap();
        assert!(matches!(
            EmbeddingModel::load(dir.path()),
            Err(EmbeddingError::UnsupportedVersion(9))
        ));
    }
}
