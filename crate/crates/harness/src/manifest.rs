//! The run manifest: what ran, under which configuration hash, and what it wrote.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};
use crate::runner::Format;
use crate::table::Check;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Completed,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub name: String,
    pub kind: String,
    pub config_hash: String,
    pub status: Status,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub artifacts: Vec<String>,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub format: Format,
    /// Earliest start and latest finish over the entries.
    pub started_unix_ms: Option<u64>,
    pub finished_unix_ms: Option<u64>,
    pub experiments: Vec<ManifestEntry>,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(
        config_hash: String,
        seed: u64,
        format: Format,
        experiments: Vec<ManifestEntry>,
    ) -> Self {
        let started_unix_ms = experiments.iter().map(|e| e.started_unix_ms).min();
        let finished_unix_ms = experiments.iter().map(|e| e.finished_unix_ms).max();
        let artifacts = experiments
            .iter()
            .flat_map(|e| e.artifacts.iter().cloned())
            .collect();
        RunManifest {
            config_hash,
            seed,
            format,
            started_unix_ms,
            finished_unix_ms,
            experiments,
            artifacts,
        }
    }

    /// A missing or unreadable manifest means nothing to resume.
    pub fn load(dir: &Path) -> Option<Self> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }

    /// The completed entry for `(index, name, hash)` whose artifacts all still exist.
    pub fn reusable(
        &self,
        dir: &Path,
        index: usize,
        name: &str,
        hash: &str,
    ) -> Option<&ManifestEntry> {
        self.experiments.iter().find(|e| {
            e.index == index
                && e.name == name
                && e.config_hash == hash
                && e.status == Status::Completed
                && e.artifacts.iter().all(|a| dir.join(a).is_file())
        })
    }
}

pub fn sha256_hex(value: &serde_json::Value) -> String {
    // Object keys serialize sorted, so equal configurations hash equally.
    let bytes = serde_json::to_vec(value).expect("JSON values serialize");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Writes through a sibling temporary file so readers never see partial output.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| HarnessError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}
