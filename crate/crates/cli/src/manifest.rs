//! Run manifests: what a command wrote and the hash of each file.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::datasets::sha256_file;
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub started: String,
    pub finished: String,
    pub artifacts: Vec<Artifact>,
}

/// Collects artifact names while a command runs.
#[derive(Debug)]
pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    started: DateTime<Utc>,
    dir: PathBuf,
    files: Vec<String>,
}

fn stamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl ManifestBuilder {
    pub fn start(command: &str, config: serde_json::Value, dir: &Path) -> Self {
        ManifestBuilder { command: command.into(), config, started: Utc::now(), dir: dir.to_path_buf(), files: Vec::new() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `bytes` to `dir/name` and records it.
    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(CliError::io(&path))?;
        self.record(name);
        Ok(path)
    }

    /// Records a file some other code already wrote under `dir`.
    pub fn record(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    /// Hashes every recorded file and writes `manifest.json`.
    pub fn finish(self) -> CliResult<RunManifest> {
        let artifacts = self
            .files
            .iter()
            .map(|name| {
                let path = self.dir.join(name);
                let bytes = fs::metadata(&path).map_err(CliError::io(&path))?.len();
                Ok(Artifact { path: name.clone(), sha256: sha256_file(&path)?, bytes })
            })
            .collect::<CliResult<Vec<_>>>()?;
        let manifest = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").into(),
            config: self.config,
            started: stamp(self.started),
            finished: stamp(Utc::now()),
            artifacts,
        };
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(CliError::io(&path))?;
        Ok(manifest)
    }
}

/// Re-hashes every artifact listed in `dir/manifest.json`; returns the
/// names whose file is missing or whose hash differs.
pub fn audit(dir: &Path) -> CliResult<Vec<String>> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| gancmp::Error::Format(format!("{}: {e}", path.display())))?;
    Ok(manifest
        .artifacts
        .into_iter()
        .filter(|a| sha256_file(&dir.join(&a.path)).map_or(true, |h| h != a.sha256))
        .map(|a| a.path)
        .collect())
}
