use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use saferl_core::digest::sha256_hex;
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one command run: what went in and what came out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub seeds: Vec<u64>,
    /// Digests of configs and input files, by role.
    pub config_digests: BTreeMap<String, String>,
    pub artifacts: Vec<Artifact>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            started_unix: now(),
            finished_unix: 0,
            seeds: Vec::new(),
            config_digests: BTreeMap::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn digest_input(&mut self, role: &str, path: &Path) -> anyhow::Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.config_digests.insert(role.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    /// Writes `bytes` to `dir/name` and records its digest.
    pub fn write_artifact(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.artifacts.retain(|a| a.path != Path::new(name));
        self.artifacts.push(Artifact {
            path: PathBuf::from(name),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn save(&mut self, dir: &Path) -> anyhow::Result<PathBuf> {
        self.finished_unix = now();
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Checks that every artifact exists under `dir` with its recorded digest.
    pub fn check(&self, dir: &Path) -> anyhow::Result<()> {
        for a in &self.artifacts {
            let path = dir.join(&a.path);
            let bytes = fs::read(&path).with_context(|| format!("artifact {} is missing", path.display()))?;
            if sha256_hex(&bytes) != a.sha256 {
                bail!("artifact {} does not match its digest", path.display());
            }
        }
        Ok(())
    }
}
