//! Content-addressed completion cache.
//!
//! Layout: `<dir>/<first two hex chars>/<key>.json`, where the key is the
//! SHA-256 of `(model_id, prompt, params)`. Each entry carries a checksum over
//! its key and text; an entry that fails to parse or verify is a miss and is
//! overwritten by the fresh completion.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::backend::{generate, GenerationParams, GenerationResult, RetryPolicy, TeacherError, TextGenerator};

/// Cache key for a completion request.
pub fn prompt_key(model_id: &str, prompt: &str, params: &GenerationParams) -> String {
    let canonical = serde_json::json!({ "model_id": model_id, "prompt": prompt, "params": params });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

fn checksum(key: &str, text: &str) -> String {
    let mut h = Sha256::new();
    h.update(key.as_bytes());
    h.update([0u8]);
    h.update(text.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub prompt_hash: String,
    pub params: GenerationParams,
    pub text: String,
    pub model_id: String,
    pub created_at: DateTime<Utc>,
    pub checksum: String,
}

impl CacheEntry {
    fn is_intact(&self, key: &str) -> bool {
        self.prompt_hash == key && self.checksum == checksum(key, &self.text)
    }
}

#[derive(Debug, Clone)]
pub struct GenerationCache {
    dir: PathBuf,
}

impl GenerationCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, TeacherError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| TeacherError::Cache(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    /// Intact entry for `key`, if any. Corrupt entries read as `None`.
    pub fn lookup(&self, key: &str) -> Option<CacheEntry> {
        let bytes = std::fs::read(self.entry_path(key)).ok()?;
        match serde_json::from_slice::<CacheEntry>(&bytes) {
            Ok(entry) if entry.is_intact(key) => Some(entry),
            _ => {
                tracing::warn!(key, "discarding corrupt cache entry");
                None
            }
        }
    }

    pub fn store(&self, result: &GenerationResult, params: &GenerationParams) -> Result<(), TeacherError> {
        let key = &result.prompt_hash;
        let entry = CacheEntry {
            prompt_hash: key.clone(),
            params: params.clone(),
            text: result.text.clone(),
            model_id: result.backend.clone(),
            created_at: result.created_at.unwrap_or_else(Utc::now),
            checksum: checksum(key, &result.text),
        };
        let path = self.entry_path(key);
        let parent = path.parent().expect("entry has a shard directory");
        let io = |e: std::io::Error| TeacherError::Cache(format!("{}: {e}", path.display()));
        std::fs::create_dir_all(parent).map_err(io)?;
        // Readers never observe a half-written entry: write aside, then rename.
        let tmp = parent.join(format!(".{key}.{}.tmp", std::process::id()));
        std::fs::write(&tmp, serde_json::to_vec_pretty(&entry).expect("entry serializes")).map_err(io)?;
        std::fs::rename(&tmp, &path).map_err(io)?;
        Ok(())
    }

    pub fn remove(&self, key: &str) -> bool {
        std::fs::remove_file(self.entry_path(key)).is_ok()
    }

    /// Number of entries on disk.
    pub fn len(&self) -> usize {
        let Ok(shards) = std::fs::read_dir(&self.dir) else { return 0 };
        shards
            .flatten()
            .filter_map(|s| std::fs::read_dir(s.path()).ok())
            .flat_map(|files| files.flatten())
            .filter(|f| f.path().extension().is_some_and(|e| e == "json"))
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Returns the cached completion for `(model, prompt, params)` or generates
/// and stores it. A hit never calls the backend.
pub fn cached_generate(
    cache: &GenerationCache,
    backend: &dyn TextGenerator,
    prompt: &str,
    params: &GenerationParams,
    retry: &RetryPolicy,
) -> Result<GenerationResult, TeacherError> {
    let key = prompt_key(backend.model_id(), prompt, params);
    if let Some(entry) = cache.lookup(&key) {
        return Ok(GenerationResult {
            text: entry.text,
            prompt_hash: key,
            cached: true,
            latency_ms: 0,
            backend: entry.model_id,
            retries: 0,
            created_at: Some(entry.created_at),
        });
    }
    let result = generate(backend, prompt, params, retry)?;
    cache.store(&result, params)?;
    Ok(result)
}
