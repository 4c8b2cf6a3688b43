//! Critique-revision and counterfactual data generation.
//!
//! For each question the teacher is asked, in order, to explain the gold
//! answer, to critique that explanation, and to revise it in light of the
//! critique. Counterfactual explanations argue for a seeded incorrect answer.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use rand::seq::IndexedRandom;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corpus::{DatasetSplit, MCQuestion};
use crate::rng;
use crate::teacher::{
    question_bindings, render_prompt, parallel_map, GenerationParams, PromptRole, TeacherClient, TeacherError, TemplateSet,
};

pub const SCHEMA: &str = "distill/v1";
pub const DEFAULT_FAILURE_THRESHOLD: f64 = 0.01;

#[derive(Debug, thiserror::Error)]
pub enum DatagenError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("teacher returned an empty {role} for question {question_id}; flagged for regeneration")]
    NeedsRegeneration { question_id: String, role: PromptRole },
    #[error(transparent)]
    Teacher(#[from] TeacherError),
    #[error("{failed} of {total} questions failed ({rate:.2}% > {threshold:.2}% allowed)", rate = 100.0 * *failed as f64 / *total as f64, threshold = 100.0 * threshold)]
    FailureRateExceeded { failed: usize, total: usize, threshold: f64, failures: Vec<GenerationFailure> },
    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("bad record file {path}: {message}")]
    Format { path: String, message: String },
}

/// One teacher call that went into a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepProvenance {
    pub role: PromptRole,
    pub model_id: String,
    pub prompt_hash: String,
    pub created_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub params: GenerationParams,
    pub steps: Vec<StepProvenance>,
}

impl Provenance {
    fn latest(&self) -> Option<DateTime<Utc>> {
        self.steps.iter().filter_map(|s| s.created_at).max()
    }
}

/// `(q, a, e, c, e')` for one question. Without revision, `c` and `e_prime`
/// are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillationRecord {
    pub question_id: String,
    pub q: MCQuestion,
    pub a: char,
    pub e: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_prime: Option<String>,
    pub provenance: Provenance,
}

impl DistillationRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.a != self.q.answer_label {
            return Err(format!("record {}: label {} is not the gold answer", self.question_id, self.a));
        }
        if self.question_id != self.q.id {
            return Err(format!("record {}: question id mismatch", self.question_id));
        }
        let blank = |s: &Option<String>| s.as_deref().is_some_and(|t| t.trim().is_empty());
        if self.e.trim().is_empty() || blank(&self.c) || blank(&self.e_prime) {
            return Err(format!("record {}: empty explanation text", self.question_id));
        }
        if self.c.is_some() != self.e_prime.is_some() {
            return Err(format!("record {}: critique and revision must both be present or absent", self.question_id));
        }
        Ok(())
    }

    pub fn is_revised(&self) -> bool {
        self.e_prime.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualRecord {
    pub question_id: String,
    pub a_star: char,
    pub e_star: String,
    pub provenance: Provenance,
}

impl CounterfactualRecord {
    pub fn validate(&self, q: &MCQuestion) -> Result<(), String> {
        if !q.labels().any(|l| l == self.a_star) {
            return Err(format!("record {}: {} is not a choice label", self.question_id, self.a_star));
        }
        if self.a_star == q.answer_label {
            return Err(format!("record {}: counterfactual answer equals gold", self.question_id));
        }
        if self.e_star.trim().is_empty() {
            return Err(format!("record {}: empty counterfactual explanation", self.question_id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationFailure {
    pub question_id: String,
    pub reason: String,
    pub needs_regeneration: bool,
}

/// Records in input order plus the questions that failed.
#[derive(Debug, Clone)]
pub struct DatasetBuild<R> {
    pub records: Vec<R>,
    pub failures: Vec<GenerationFailure>,
}

/// Teacher, prompts and decoding settings shared by all generation steps.
#[derive(Clone)]
pub struct Generator<'a> {
    pub teacher: &'a TeacherClient,
    pub templates: &'a TemplateSet,
    pub params: &'a GenerationParams,
}

/// Trimmed text of one step plus its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub text: String,
    pub provenance: StepProvenance,
}

impl Generator<'_> {
    fn step(&self, role: PromptRole, q: &MCQuestion, answer: char, extra: &[(&str, &str)]) -> Result<StepOutput, DatagenError> {
        if !q.labels().any(|l| l == answer) {
            return Err(DatagenError::Precondition(format!("label {answer} is not a choice of {}", q.id)));
        }
        let mut bindings = question_bindings(q, answer);
        for (k, v) in extra {
            if v.trim().is_empty() {
                return Err(DatagenError::Precondition(format!("{k} must be non-empty for the {role} step")));
            }
            bindings.insert((*k).to_string(), (*v).to_string());
        }
        let prompt = render_prompt(self.templates.get(role).map_err(TeacherError::from)?, &bindings)
            .map_err(TeacherError::from)?;
        let result = match self.teacher.generate(role, &prompt, self.params) {
            Err(TeacherError::EmptyCompletion { .. }) => {
                return Err(DatagenError::NeedsRegeneration { question_id: q.id.clone(), role })
            }
            other => other?,
        };
        let text = result.text.trim().to_string();
        if text.is_empty() {
            return Err(DatagenError::NeedsRegeneration { question_id: q.id.clone(), role });
        }
        Ok(StepOutput {
            text,
            provenance: StepProvenance {
                role,
                model_id: result.backend,
                prompt_hash: result.prompt_hash,
                created_at: result.created_at,
            },
        })
    }

    pub fn generate_explanation(&self, q: &MCQuestion, a: char) -> Result<StepOutput, DatagenError> {
        self.step(PromptRole::Explain, q, a, &[])
    }

    pub fn critique(&self, q: &MCQuestion, a: char, e: &str) -> Result<StepOutput, DatagenError> {
        self.step(PromptRole::Critique, q, a, &[("explanation", e)])
    }

    pub fn revise(&self, q: &MCQuestion, a: char, e: &str, c: &str) -> Result<StepOutput, DatagenError> {
        self.step(PromptRole::Revise, q, a, &[("explanation", e), ("critique", c)])
    }

    pub fn counterfactual_explanation(&self, q: &MCQuestion, a_star: char) -> Result<StepOutput, DatagenError> {
        self.step(PromptRole::Counterfactual, q, a_star, &[])
    }

    fn distill_one(&self, q: &MCQuestion, revision: bool) -> Result<DistillationRecord, DatagenError> {
        let a = q.answer_label;
        let e = self.generate_explanation(q, a)?;
        let mut steps = vec![e.provenance];
        let (c, e_prime) = if revision {
            let c = self.critique(q, a, &e.text)?;
            let r = self.revise(q, a, &e.text, &c.text)?;
            steps.push(c.provenance);
            steps.push(r.provenance);
            (Some(c.text), Some(r.text))
        } else {
            (None, None)
        };
        Ok(DistillationRecord {
            question_id: q.id.clone(),
            q: q.clone(),
            a,
            e: e.text,
            c,
            e_prime,
            provenance: Provenance { params: self.params.clone(), steps },
        })
    }

    fn counterfactual_one(&self, q: &MCQuestion, seed: u64) -> Result<CounterfactualRecord, DatagenError> {
        let a_star = sample_incorrect_answer(q, seed);
        let e = self.counterfactual_explanation(q, a_star)?;
        Ok(CounterfactualRecord {
            question_id: q.id.clone(),
            a_star,
            e_star: e.text,
            provenance: Provenance { params: self.params.clone(), steps: vec![e.provenance] },
        })
    }
}

/// Uniform draw over the non-gold labels, deterministic in `(q.id, seed)`.
pub fn sample_incorrect_answer(q: &MCQuestion, seed: u64) -> char {
    let wrong: Vec<char> = q.labels().filter(|&l| l != q.answer_label).collect();
    let mut rng = rng::stream(seed, &format!("datagen.incorrect:{}", q.id));
    *wrong.choose(&mut rng).expect("a valid question has incorrect choices")
}

fn collect<R>(
    questions: &[MCQuestion],
    outcomes: Vec<Result<R, DatagenError>>,
    threshold: f64,
) -> Result<DatasetBuild<R>, DatagenError> {
    let mut records = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (q, outcome) in questions.iter().zip(outcomes) {
        match outcome {
            Ok(r) => records.push(r),
            Err(err) => {
                tracing::warn!(question = %q.id, error = %err, "generation failed");
                failures.push(GenerationFailure {
                    question_id: q.id.clone(),
                    needs_regeneration: matches!(err, DatagenError::NeedsRegeneration { .. }),
                    reason: err.to_string(),
                });
            }
        }
    }
    let total = questions.len();
    if failures.len() as f64 > threshold * total as f64 {
        return Err(DatagenError::FailureRateExceeded { failed: failures.len(), total, threshold, failures });
    }
    Ok(DatasetBuild { records, failures })
}

/// Runs the explain (and, with `revision`, critique and revise) steps for
/// every question. Completed steps are served from the teacher's cache on
/// reruns.
pub fn build_distillation_dataset(
    split: &DatasetSplit,
    generator: &Generator<'_>,
    revision: bool,
    failure_threshold: f64,
) -> Result<DatasetBuild<DistillationRecord>, DatagenError> {
    if split.is_empty() {
        return Err(DatagenError::Precondition("split is empty".into()));
    }
    let outcomes = parallel_map(&split.questions, generator.teacher.concurrency, |_, q| generator.distill_one(q, revision));
    let build = collect(&split.questions, outcomes, failure_threshold)?;
    if revision {
        let stats = length_stats(&build.records);
        tracing::info!(mean_words_e = stats.0, mean_words_e_prime = stats.1, "explanation lengths before/after revision");
    }
    Ok(build)
}

pub fn build_counterfactual_dataset(
    split: &DatasetSplit,
    generator: &Generator<'_>,
    seed: u64,
    failure_threshold: f64,
) -> Result<DatasetBuild<CounterfactualRecord>, DatagenError> {
    if split.is_empty() {
        return Err(DatagenError::Precondition("split is empty".into()));
    }
    let outcomes = parallel_map(&split.questions, generator.teacher.concurrency, |_, q| generator.counterfactual_one(q, seed));
    collect(&split.questions, outcomes, failure_threshold)
}

/// Mean whitespace-token length of `e` and of `e'` over revised records.
pub fn length_stats(records: &[DistillationRecord]) -> (f64, f64) {
    let revised: Vec<_> = records.iter().filter(|r| r.e_prime.is_some()).collect();
    if revised.is_empty() {
        return (0.0, 0.0);
    }
    let n = revised.len() as f64;
    let words = |s: &str| s.split_whitespace().count() as f64;
    let e = revised.iter().map(|r| words(&r.e)).sum::<f64>() / n;
    let ep = revised.iter().map(|r| words(r.e_prime.as_deref().unwrap_or_default())).sum::<f64>() / n;
    (e, ep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Distillation,
    Counterfactual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHeader {
    pub schema: String,
    pub kind: RecordKind,
    pub model_id: String,
    pub created_at: Option<DateTime<Utc>>,
}

pub trait Record: Serialize + DeserializeOwned {
    const KIND: RecordKind;
    fn provenance(&self) -> &Provenance;
}

impl Record for DistillationRecord {
    const KIND: RecordKind = RecordKind::Distillation;
    fn provenance(&self) -> &Provenance {
        &self.provenance
    }
}

impl Record for CounterfactualRecord {
    const KIND: RecordKind = RecordKind::Counterfactual;
    fn provenance(&self) -> &Provenance {
        &self.provenance
    }
}

/// Serializes records as NDJSON behind a schema header line. The header's
/// `created_at` is the latest teacher timestamp in the records, so a rerun
/// from a warm cache reproduces the file byte for byte.
pub fn to_ndjson<R: Record>(records: &[R], model_id: &str) -> String {
    let header = FileHeader {
        schema: SCHEMA.to_string(),
        kind: R::KIND,
        model_id: model_id.to_string(),
        created_at: records.iter().filter_map(|r| r.provenance().latest()).max(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_records<R: Record>(path: impl AsRef<Path>, records: &[R], model_id: &str) -> Result<(), DatagenError> {
    let path = path.as_ref();
    let io = |e: std::io::Error| DatagenError::Io { path: path.display().to_string(), message: e.to_string() };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    let mut file = std::fs::File::create(path).map_err(io)?;
    file.write_all(to_ndjson(records, model_id).as_bytes()).map_err(io)
}

pub fn read_records<R: Record>(path: impl AsRef<Path>) -> Result<(FileHeader, Vec<R>), DatagenError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| DatagenError::Io { path: name.clone(), message: e.to_string() })?;
    let mut lines = BufReader::new(file).lines();
    let fmt = |message: String| DatagenError::Format { path: name.clone(), message };
    let header_line = lines
        .next()
        .ok_or_else(|| fmt("missing header line".into()))?
        .map_err(|e| fmt(e.to_string()))?;
    let header: FileHeader = serde_json::from_str(&header_line).map_err(|e| fmt(format!("header: {e}")))?;
    if header.schema != SCHEMA {
        return Err(fmt(format!("unsupported schema {}", header.schema)));
    }
    if header.kind != R::KIND {
        return Err(fmt(format!("expected {:?} records, file holds {:?}", R::KIND, header.kind)));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| fmt(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| fmt(format!("line {}: {e}", i + 2)))?);
    }
    Ok((header, records))
}
