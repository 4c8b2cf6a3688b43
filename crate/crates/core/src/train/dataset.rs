//! Training-example files: NDJSON behind a header naming how they were built.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::examples::{tag_histogram, CfCorrectTarget, TaskTag, TrainingExample};
use super::TrainError;
use crate::variant::{ExplanationSource, TrainingMethod};

pub const EXAMPLES_SCHEMA: &str = "distill-examples/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamplesHeader {
    pub schema: String,
    pub method: TrainingMethod,
    pub source: ExplanationSource,
    pub cf_correct_target: CfCorrectTarget,
    pub seed: u64,
    pub questions: usize,
    pub tags: std::collections::BTreeMap<TaskTag, usize>,
}

impl ExamplesHeader {
    pub fn new(
        method: TrainingMethod,
        source: ExplanationSource,
        cf_correct_target: CfCorrectTarget,
        seed: u64,
        examples: &[TrainingExample],
    ) -> Self {
        let questions = examples.iter().map(|e| e.question_id.as_str()).collect::<std::collections::BTreeSet<_>>().len();
        Self {
            schema: EXAMPLES_SCHEMA.to_string(),
            method,
            source,
            cf_correct_target,
            seed,
            questions,
            tags: tag_histogram(examples),
        }
    }
}

pub fn write_examples(path: impl AsRef<Path>, header: &ExamplesHeader, examples: &[TrainingExample]) -> Result<(), TrainError> {
    let path = path.as_ref();
    let io = |e: std::io::Error| TrainError::Data(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(out, "{}", serde_json::to_string(header).expect("header serializes")).map_err(io)?;
    for e in examples {
        writeln!(out, "{}", serde_json::to_string(e).expect("example serializes")).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_examples(path: impl AsRef<Path>) -> Result<(ExamplesHeader, Vec<TrainingExample>), TrainError> {
    let path = path.as_ref();
    let err = |m: String| TrainError::Data(format!("{}: {m}", path.display()));
    let file = std::fs::File::open(path).map_err(|e| err(e.to_string()))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines.next().ok_or_else(|| err("missing header line".into()))?.map_err(|e| err(e.to_string()))?;
    let header: ExamplesHeader = serde_json::from_str(&first).map_err(|e| err(format!("header: {e}")))?;
    if header.schema != EXAMPLES_SCHEMA {
        return Err(err(format!("unsupported schema {}", header.schema)));
    }
    let mut examples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        examples.push(serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", i + 2)))?);
    }
    Ok((header, examples))
}
