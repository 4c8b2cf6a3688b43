//! Run manifests: what a command was asked to do, on which inputs, and what
//! it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: Vec<String>,
    pub config: serde_json::Value,
    /// Input path to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<PathBuf>,
    pub started_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_code: Option<i32>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn fingerprint_file(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

impl RunManifest {
    /// Starts a manifest; the id hashes the command, config and input
    /// fingerprints, so identical invocations share an id.
    pub fn start(command: Vec<String>, config: serde_json::Value, inputs: &[&Path]) -> std::io::Result<Self> {
        let mut fp = BTreeMap::new();
        for p in inputs {
            fp.insert(p.display().to_string(), fingerprint_file(p)?);
        }
        let key = serde_json::to_vec(&(&command, &config, &fp)).expect("manifest fields serialize");
        Ok(RunManifest {
            run_id: sha256_hex(&key)[..16].to_string(),
            command,
            config,
            inputs: fp,
            outputs: Vec::new(),
            started_at: Utc::now(),
            finished_at: None,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            exit_code: None,
        })
    }

    pub fn finish(&mut self, outputs: Vec<PathBuf>, exit_code: i32) {
        self.outputs = outputs;
        self.exit_code = Some(exit_code);
        self.finished_at = Some(Utc::now());
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_vec_pretty(self).expect("manifest serializes"))
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}
