use std::path::Path;

use hgac::envs::ScenarioConfig;
use hgac::Result;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

/// SHA-1 of `"blob <len>\0" + bytes`, the object id git assigns to a file.
pub fn git_blob_sha1(bytes: &[u8]) -> String {
    let mut h = sha1_smol::Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.digest().to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub git_blob_sha1: String,
}

impl FileDigest {
    pub fn of(dir: &Path, name: &str) -> Result<Self> {
        let bytes = std::fs::read(dir.join(name))?;
        Ok(Self {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            git_blob_sha1: git_blob_sha1(&bytes),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub config: RunConfig,
    pub scenario: ScenarioConfig,
    pub episodes: usize,
    pub updates: usize,
    pub checkpoint: FileDigest,
    pub metrics: FileDigest,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }
}
