//! Checkpoint directories: `student.json` holds the weights, `manifest.json`
//! the run description.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::student::{MlpDims, MlpStudent, Seq2SeqStudent};
use super::tokenizer::Tokenizer;
use super::trainer::TrainingConfig;
use super::TrainError;
use crate::variant::ModelVariant;
use crate::Scalar;

pub const WEIGHTS_FILE: &str = "student.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.ndjson";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub run_id: String,
    pub config: TrainingConfig,
    pub variant: ModelVariant,
    pub size: String,
    pub data_fingerprints: Vec<String>,
    pub student_kind: String,
    pub num_params: usize,
}

impl CheckpointManifest {
    pub fn new(config: &TrainingConfig, variant: ModelVariant, size: &str, data_fingerprints: Vec<String>, num_params: usize) -> Self {
        let run_id = run_id(&(config, variant, size, &data_fingerprints));
        Self {
            run_id,
            config: config.clone(),
            variant,
            size: size.to_string(),
            data_fingerprints,
            student_kind: "mlp-seq2seq".into(),
            num_params,
        }
    }
}

/// 40-hex-digit identifier derived from the serialized inputs.
pub fn run_id(inputs: &impl Serialize) -> String {
    let bytes = serde_json::to_vec(inputs).expect("run inputs serialize");
    hex::encode(Sha256::digest(&bytes))[..40].to_string()
}

#[derive(Serialize, Deserialize)]
struct SavedWeights {
    kind: String,
    dims: MlpDims,
    tokens: Tokenizer,
    params: Vec<f64>,
}

pub fn save_checkpoint<T: Scalar>(
    dir: impl AsRef<Path>,
    student: &MlpStudent<T>,
    manifest: &CheckpointManifest,
) -> Result<(), TrainError> {
    let dir = dir.as_ref();
    let io = |e: std::io::Error| TrainError::Checkpoint(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let weights = SavedWeights {
        kind: "mlp-seq2seq".into(),
        dims: student.dims,
        tokens: student.tokenizer.clone(),
        params: student.params().iter().map(|p| p.as_f64()).collect(),
    };
    std::fs::write(dir.join(WEIGHTS_FILE), serde_json::to_vec(&weights).expect("weights serialize")).map_err(io)?;
    std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(manifest).expect("manifest serializes")).map_err(io)?;
    Ok(())
}

pub fn load_student<T: Scalar>(dir: impl AsRef<Path>) -> Result<MlpStudent<T>, TrainError> {
    let path = dir.as_ref().join(WEIGHTS_FILE);
    let err = |m: String| TrainError::Checkpoint(format!("{}: {m}", path.display()));
    let bytes = std::fs::read(&path).map_err(|e| err(e.to_string()))?;
    let mut saved: SavedWeights = serde_json::from_slice(&bytes).map_err(|e| err(e.to_string()))?;
    if saved.kind != "mlp-seq2seq" {
        return Err(err(format!("unsupported student kind `{}`", saved.kind)));
    }
    saved.tokens.reindex();
    MlpStudent::from_parts(saved.dims, saved.tokens, saved.params.into_iter().map(T::of).collect()).map_err(err)
}

pub fn load_manifest(dir: impl AsRef<Path>) -> Result<CheckpointManifest, TrainError> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    let bytes = std::fs::read(&path).map_err(|e| TrainError::Checkpoint(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| TrainError::Checkpoint(format!("{}: {e}", path.display())))
}
