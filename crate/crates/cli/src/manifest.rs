use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::Job;

/// Wall-clock seconds per named stage. Only ever written to manifests.
#[derive(Default)]
pub struct Timings(Vec<(String, f64)>);

impl Timings {
    pub fn time<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push((label.to_string(), start.elapsed().as_secs_f64()));
        out
    }
}

/// Everything a job produced, held in memory until the job has succeeded.
pub struct Outcome {
    /// Effective library configuration of the run.
    pub config: Value,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    /// Primary output first.
    pub files: Vec<(PathBuf, Vec<u8>)>,
    pub timings: Timings,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn new(config: impl Serialize, seed: Option<u64>) -> anyhow::Result<Self> {
        Ok(Outcome {
            config: serde_json::to_value(config)?,
            seed,
            inputs: Vec::new(),
            files: Vec::new(),
            timings: Timings::default(),
            warnings: Vec::new(),
        })
    }

    pub fn add_json(&mut self, path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.files.push((path.to_path_buf(), bytes));
        Ok(())
    }

    pub fn add_bytes(&mut self, path: &Path, bytes: Vec<u8>) {
        self.files.push((path.to_path_buf(), bytes));
    }

    pub fn write_files(&self) -> anyhow::Result<Vec<PathBuf>> {
        for (path, bytes) in &self.files {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(self.files.iter().map(|(p, _)| p.clone()).collect())
    }
}

#[derive(Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Job,
    pub config: Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub rerun_of: Option<PathBuf>,
    pub timings_seconds: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: Job, outcome: &Outcome, rerun_of: Option<PathBuf>) -> Self {
        RunManifest {
            command,
            config: outcome.config.clone(),
            seed: outcome.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: outcome.inputs.clone(),
            outputs: outcome.files.iter().map(|(p, _)| p.clone()).collect(),
            warnings: outcome.warnings.clone(),
            rerun_of,
            timings_seconds: outcome.timings.0.iter().cloned().collect(),
        }
    }

    /// `out.json` gets `out.manifest.json`.
    pub fn path_for(output: &Path) -> PathBuf {
        output.with_extension("manifest.json")
    }

    pub fn write_next_to(&self, output: &Path) -> anyhow::Result<PathBuf> {
        let path = Self::path_for(output);
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(RunManifest::path_for(Path::new("/a/event.json")), PathBuf::from("/a/event.manifest.json"));
        assert_eq!(RunManifest::path_for(Path::new("/a/curve.csv")), PathBuf::from("/a/curve.manifest.json"));
        assert_eq!(RunManifest::path_for(Path::new("/a/out")), PathBuf::from("/a/out.manifest.json"));
    }

    #[test]
    fn timings_record_labels_in_order() {
        let mut t = Timings::default();
        assert_eq!(t.time("a", || 1 + 1), 2);
        t.time("b", || ());
        let labels: Vec<&str> = t.0.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(labels, ["a", "b"]);
    }
}
