use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{PipelineConfig, PipelineError};
use crate::fsutil::{sha256_file, write_atomic};

pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<FileHash>,
    pub stages: Vec<StageTiming>,
    pub outputs: Vec<FileHash>,
    pub notes: Vec<String>,
    pub created: String,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let p = dir.join(RUN_MANIFEST_FILE);
        let text = std::fs::read_to_string(&p).map_err(|e| PipelineError::io(&p, e))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Input(format!("{}: {e}", p.display())))
    }

    /// Recomputes every listed hash; returns the paths that no longer match.
    pub fn stale_files(&self) -> Vec<PathBuf> {
        self.inputs
            .iter()
            .chain(&self.outputs)
            .filter(|f| sha256_file(&f.path).ok().as_deref() != Some(f.sha256.as_str()))
            .map(|f| f.path.clone())
            .collect()
    }
}

/// Collects hashes and timings while a command runs.
pub struct RunRecorder {
    command: String,
    config: serde_json::Value,
    seed: u64,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
    stages: Vec<StageTiming>,
    notes: Vec<String>,
}

fn hash(path: &Path) -> Result<FileHash, PipelineError> {
    Ok(FileHash {
        path: path.to_path_buf(),
        sha256: sha256_file(path).map_err(|e| PipelineError::io(path, e))?,
    })
}

impl RunRecorder {
    pub fn new(command: &str, config: &PipelineConfig) -> Self {
        RunRecorder {
            command: command.to_string(),
            config: serde_json::to_value(config).expect("configuration serializes"),
            seed: config.seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            stages: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), PipelineError> {
        if !self.inputs.iter().any(|f| f.path == path) {
            self.inputs.push(hash(path)?);
        }
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), PipelineError> {
        self.outputs.retain(|f| f.path != path);
        self.outputs.push(hash(path)?);
        Ok(())
    }

    /// Writes `bytes` atomically and records the file as an output.
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
        write_atomic(path, bytes).map_err(|e| PipelineError::io(path, e))?;
        self.output(path)
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn stage<R>(&mut self, name: &str, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        let seconds = start.elapsed().as_secs_f64();
        log::info!("{name}: {seconds:.2}s");
        self.stages.push(StageTiming {
            stage: name.to_string(),
            seconds,
        });
        out
    }

    pub fn finish(self, dir: &Path) -> Result<RunManifest, PipelineError> {
        let manifest = RunManifest {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command,
            seed: self.seed,
            config: self.config,
            inputs: self.inputs,
            stages: self.stages,
            outputs: self.outputs,
            notes: self.notes,
            created: chrono::Utc::now().to_rfc3339(),
        };
        let p = dir.join(RUN_MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_atomic(&p, json.as_bytes()).map_err(|e| PipelineError::io(&p, e))?;
        Ok(manifest)
    }
}
