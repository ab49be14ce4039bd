use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::embedding::EmbeddingConfig;
use crate::evaluation::{PuEvalConfig, SelectionMetric};
use crate::heuristics::HeuristicThresholds;
use crate::pu::{PuConfig, PuGrid, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    /// by file extension
    #[default]
    Auto,
    Xml,
    Jsonl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub paths: Vec<PathBuf>,
    pub format: InputFormat,
    /// site the XML dumps come from
    pub source: String,
    /// file of post ids (one per line) known to be positive
    pub external_positives: Option<PathBuf>,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            paths: Vec::new(),
            format: InputFormat::Auto,
            source: "stackoverflow".into(),
            external_positives: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextConfig {
    /// built-in lexicon when unset
    pub lexicon: Option<PathBuf>,
    /// built-in English list when unset
    pub stopwords: Option<PathBuf>,
    /// join multi-word lexicon phrases into single tokens
    pub phrases: bool,
}

impl Default for TextConfig {
    fn default() -> Self {
        TextConfig {
            lexicon: None,
            stopwords: None,
            phrases: true,
        }
    }
}

/// Where the training vectors of labelled and unlabelled posts come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocFeatures {
    /// re-inferred from tokens, as at prediction time
    #[default]
    Inferred,
    /// the trained id-label vectors
    IdLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PuSection {
    pub features: DocFeatures,
    pub grid: PuGrid,
    /// configuration for `train`; otherwise the cross-validation winner
    pub chosen: Option<PuConfig>,
}

impl Default for PuSection {
    fn default() -> Self {
        PuSection {
            features: DocFeatures::Inferred,
            grid: PuGrid::default(),
            chosen: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSection {
    pub k: usize,
    pub selection: SelectionMetric,
}

impl Default for CvSection {
    fn default() -> Self {
        CvSection {
            k: 10,
            selection: SelectionMetric::GMeanPu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// drives every random choice; copied into the embedding and PU configs
    pub seed: u64,
    pub output_dir: PathBuf,
    pub threshold: f64,
    pub input: InputConfig,
    pub text: TextConfig,
    pub heuristics: HeuristicThresholds,
    pub embedding: EmbeddingConfig,
    pub pu: PuSection,
    pub cv: CvSection,
    pub evaluation: PuEvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            output_dir: PathBuf::from("secmine-out"),
            threshold: DEFAULT_THRESHOLD,
            input: InputConfig::default(),
            text: TextConfig::default(),
            heuristics: HeuristicThresholds::default(),
            embedding: EmbeddingConfig::default(),
            pu: PuSection::default(),
            cv: CvSection::default(),
            evaluation: PuEvalConfig::default(),
        }
    }
}

/// Set `key` (dot-separated) in a TOML table. The value is parsed as a TOML
/// literal when possible and taken as a plain string otherwise.
fn apply_override(root: &mut toml::Table, key: &str, raw: &str) -> Result<(), PipelineError> {
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(PipelineError::Usage(format!("malformed key {key:?}")));
    }
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| PipelineError::Usage(format!("{key:?}: {part:?} is not a section")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl PipelineConfig {
    /// Reads `path` (if any), applies `--key value` overrides in order, then
    /// the global seed. Missing keys take their defaults.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)], seed: Option<u64>) -> Result<Self, PipelineError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| PipelineError::io(p, e))?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| PipelineError::Usage(format!("{}: {}", p.display(), e.message())))?
            }
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            apply_override(&mut table, k, v)?;
        }
        let mut cfg: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| PipelineError::Usage(format!("configuration: {}", e.message())))?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.embedding.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let usage = |m: String| Err(PipelineError::Usage(m));
        if !(0.0..=1.0).contains(&self.threshold) {
            return usage(format!("threshold must lie in [0, 1], got {}", self.threshold));
        }
        if self.cv.k < 2 {
            return usage(format!("cv.k must be at least 2, got {}", self.cv.k));
        }
        if !(0.0..=1.0).contains(&self.evaluation.r) {
            return usage(format!("evaluation.r must lie in [0, 1], got {}", self.evaluation.r));
        }
        if let Some(p) = self.evaluation.prior {
            if !(p > 0.0 && p <= 1.0) {
                return usage(format!("evaluation.prior must lie in (0, 1], got {p}"));
            }
        }
        self.heuristics.validate().map_err(|e| PipelineError::Usage(e.to_string()))?;
        self.embedding.validate().map_err(|e| PipelineError::Usage(e.to_string()))?;
        self.pu.grid.validate().map_err(|e| PipelineError::Usage(e.to_string()))?;
        if let Some(c) = &self.pu.chosen {
            c.validate().map_err(|e| PipelineError::Usage(e.to_string()))?;
        }
        Ok(())
    }

    /// Referenced files must exist before a stage that reads them starts.
    pub fn check_inputs(&self) -> Result<(), PipelineError> {
        if self.input.paths.is_empty() {
            return Err(PipelineError::Usage("no input paths configured (input.paths)".into()));
        }
        let optional = [&self.text.lexicon, &self.text.stopwords, &self.input.external_positives];
        for p in self.input.paths.iter().chain(optional.into_iter().flatten()) {
            if !p.is_file() {
                return Err(PipelineError::Input(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.output_dir.join(stage)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = PipelineConfig::load(
            None,
            &[
                ("embedding.dim".into(), "64".into()),
                ("output_dir".into(), "runs/a".into()),
                ("pu.grid.alphas".into(), "[1.0]".into()),
                ("evaluation.r".into(), "0.05".into()),
            ],
            Some(7),
        )
        .unwrap();
        assert_eq!(cfg.embedding.dim, 64);
        assert_eq!(cfg.output_dir, PathBuf::from("runs/a"));
        assert_eq!(cfg.pu.grid.alphas, vec![1.0]);
        assert_eq!(cfg.evaluation.r, 0.05);
        assert_eq!((cfg.seed, cfg.embedding.seed), (7, 7));
        assert_eq!(cfg.pu.grid.classifiers.len(), 22);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = PipelineConfig::load(None, &[("embedding.dims".into(), "3".into())], None).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(PipelineConfig::load(None, &[("threshold".into(), "2".into())], None).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = PipelineConfig::default();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, cfg.to_toml()).unwrap();
        let back = PipelineConfig::load(Some(&p), &[], None).unwrap();
        let mut expected = cfg.clone();
        expected.embedding.seed = expected.seed;
        assert_eq!(back, expected);
    }
}
