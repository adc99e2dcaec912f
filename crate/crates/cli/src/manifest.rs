//! Run manifests: what was run, with which inputs, and digests of what it wrote.

use crate::commands::Format;
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn unix_time() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub version: String,
    pub command: Vec<String>,
    pub config: Value,
    pub seed: u64,
    pub format: Format,
    /// Informational; outputs do not depend on it.
    pub threads: usize,
    /// Seconds since the Unix epoch.
    pub started: u64,
    pub finished: u64,
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    /// Digest of everything that determines the outputs.
    pub fn input_digest(&self) -> String {
        let key = serde_json::json!({
            "version": self.version,
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "format": self.format,
        });
        sha256_hex(key.to_string().as_bytes())
    }

    pub fn run_dir(&self, root: &Path) -> PathBuf {
        root.join(format!("{}-{}", self.command.join("-"), &self.input_digest()[..16]))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let p = if dir.is_dir() { dir.join(MANIFEST) } else { dir.to_path_buf() };
        let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        crate::commands::decode(&serde_json::from_str(&text).with_context(|| format!("{} is not JSON", p.display()))?)
    }
}
