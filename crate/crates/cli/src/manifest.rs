//! Run manifests: what was run, on which inputs, with which parameters.

use std::path::Path;
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Stage {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub params: Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Values the run derived, such as a resolved Otsu threshold.
    pub results: Value,
    pub started_at: String,
    pub finished_at: String,
    pub stages: Vec<Stage>,
    /// SHA-256 over everything above except times and paths, so reruns
    /// on identical inputs hash identically.
    pub run_hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(role: &str, path: &Path) -> CliResult<FileDigest> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(FileDigest {
        role: role.to_string(),
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Collects stage timings and digests while a command runs.
pub struct ManifestBuilder {
    command: String,
    params: Value,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    results: Value,
    started_at: String,
    stages: Vec<Stage>,
    clock: Instant,
}

impl ManifestBuilder {
    pub fn start(command: &str, params: Value) -> Self {
        Self {
            command: command.to_string(),
            params,
            inputs: Vec::new(),
            outputs: Vec::new(),
            results: Value::Null,
            started_at: now(),
            stages: Vec::new(),
            clock: Instant::now(),
        }
    }

    pub fn results(&mut self, v: Value) {
        self.results = v;
    }

    pub fn input(&mut self, d: FileDigest) {
        self.inputs.push(d);
    }

    pub fn output(&mut self, role: &str, path: &Path) -> CliResult<()> {
        let d = digest_file(role, path).map_err(|e| CliError::failure(e.to_string()))?;
        self.outputs.push(d);
        Ok(())
    }

    /// Close the current stage.
    pub fn lap(&mut self, stage: &str) {
        self.stages.push(Stage { stage: stage.to_string(), seconds: self.clock.elapsed().as_secs_f64() });
        self.clock = Instant::now();
    }

    pub fn stage(&mut self, stage: &str, seconds: f64) {
        self.stages.push(Stage { stage: stage.to_string(), seconds });
    }

    pub fn reset_clock(&mut self) {
        self.clock = Instant::now();
    }

    pub fn finish(self) -> RunManifest {
        let hashed = serde_json::json!({
            "version": TOOL_VERSION,
            "command": self.command,
            "params": self.params,
            "inputs": self.inputs.iter().map(|d| (&d.role, &d.sha256)).collect::<Vec<_>>(),
            "outputs": self.outputs.iter().map(|d| (&d.role, &d.sha256)).collect::<Vec<_>>(),
            "results": self.results,
        });
        let run_hash = sha256_hex(hashed.to_string().as_bytes());
        RunManifest {
            tool: "volseg",
            version: TOOL_VERSION,
            command: self.command,
            params: self.params,
            inputs: self.inputs,
            outputs: self.outputs,
            results: self.results,
            started_at: self.started_at,
            finished_at: now(),
            stages: self.stages,
            run_hash,
        }
    }
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::failure(e.to_string()))?;
        std::fs::write(&path, text + "\n")
            .map_err(|e| CliError::failure(format!("cannot write {}: {e}", path.display())))
    }
}
