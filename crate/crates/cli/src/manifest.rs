//! Run manifests: a deterministic JSON record of what a command ran with
//! and what it produced. Re-running the recorded command reproduces the
//! outputs byte for byte, so wall-clock timings go to a sidecar file
//! (timings.json) that is excluded from any determinism guarantee.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Input paths as given on the command line.
    pub inputs: BTreeMap<String, String>,
    /// Output file names, relative to the --out directory.
    pub outputs: BTreeMap<String, String>,
    /// Echo of the effective configuration.
    pub config: serde_json::Value,
    pub results: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            seed,
            workers: None,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            config: serde_json::Value::Null,
            results: serde_json::Value::Null,
        }
    }

    pub fn input(&mut self, key: &str, path: &Path) -> &mut Self {
        self.inputs.insert(key.to_string(), path.display().to_string());
        self
    }

    pub fn output(&mut self, key: &str, file_name: &str) -> &mut Self {
        self.outputs.insert(key.to_string(), file_name.to_string());
        self
    }

    pub fn write(&self, out_dir: &Path, suffix: &str) -> Result<PathBuf, CliError> {
        let path = out_dir.join(format!("manifest.json{suffix}"));
        let mut file = std::fs::File::create(&path)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        serde_json::to_writer_pretty(&mut file, self)
            .map_err(|e| CliError::io(format!("cannot serialize manifest: {e}")))?;
        writeln!(file).map_err(|e| CliError::io(format!("cannot write manifest: {e}")))?;
        Ok(path)
    }
}

/// Wall-clock stage timings, written separately from the manifest.
pub struct Timings {
    stages: Vec<(String, f64)>,
    current: Option<(String, Instant)>,
}

impl Timings {
    pub fn new() -> Self {
        Timings {
            stages: Vec::new(),
            current: None,
        }
    }

    pub fn stage(&mut self, name: &str) {
        self.finish_stage();
        self.current = Some((name.to_string(), Instant::now()));
    }

    fn finish_stage(&mut self) {
        if let Some((name, start)) = self.current.take() {
            self.stages.push((name, start.elapsed().as_secs_f64()));
        }
    }

    pub fn write(mut self, out_dir: &Path) -> Result<(), CliError> {
        self.finish_stage();
        let map: BTreeMap<String, f64> = self.stages.into_iter().collect();
        let path = out_dir.join("timings.json");
        let mut file = std::fs::File::create(&path)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        serde_json::to_writer_pretty(&mut file, &map)
            .map_err(|e| CliError::io(format!("cannot serialize timings: {e}")))?;
        writeln!(file).map_err(|e| CliError::io(format!("cannot write timings: {e}")))?;
        Ok(())
    }
}
