//! Training-example builders for multitask, counterfactual and combined
//! training.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::MCQuestion;
use crate::datagen::{CounterfactualRecord, DistillationRecord};
use crate::rng;
use crate::variant::{ExplanationSource, ModelVariant, TrainingMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskTag {
    Answer,
    Explain,
    CfCorrect,
    CfIncorrect,
}

impl TaskTag {
    pub const ALL: [TaskTag; 4] = [Self::Answer, Self::Explain, Self::CfCorrect, Self::CfIncorrect];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Answer => "answer",
            Self::Explain => "explain",
            Self::CfCorrect => "cf_correct",
            Self::CfIncorrect => "cf_incorrect",
        }
    }
}

impl fmt::Display for TaskTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Task label the student sees at the start of its input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskMode {
    Answer,
    Explain,
}

impl TaskMode {
    pub fn prefix(self) -> &'static str {
        match self {
            Self::Answer => "[answer] ",
            Self::Explain => "[explain] ",
        }
    }

    /// Student input for `q` in this mode.
    pub fn input(self, q: &MCQuestion) -> String {
        format!("{}{}", self.prefix(), q.render())
    }
}

impl FromStr for TaskMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "answer" => Ok(Self::Answer),
            "explain" => Ok(Self::Explain),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

/// What the `cf_correct` task asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfCorrectTarget {
    /// The gold answer text alone.
    Answer,
    /// `"<explanation> So the answer is <gold text>."`
    ExplanationThenAnswer,
}

impl CfCorrectTarget {
    /// Default per method: a counterfactual-only student has no explain task,
    /// so its correct-path target carries the explanation. With multitask
    /// data present the explain task already covers it, and `[answer]` inputs
    /// must map to one target.
    pub fn default_for(method: TrainingMethod) -> Self {
        match method {
            TrainingMethod::Counterfactual => Self::ExplanationThenAnswer,
            TrainingMethod::Multitask | TrainingMethod::Combined => Self::Answer,
        }
    }
}

pub const ANSWER_MARKER: &str = "So the answer is";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrainingExample {
    pub question_id: String,
    pub input_text: String,
    pub target_text: String,
    pub tag: TaskTag,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error("record {0} has no revised explanation; rerun data generation with revision on")]
    MissingRevision(String),
    #[error("duplicate question id `{0}` in {1}")]
    DuplicateId(String, &'static str),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
}

/// Questions present on only one side of a counterfactual join.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnmatchedReport {
    pub records_without_counterfactual: Vec<String>,
    pub counterfactuals_without_record: Vec<String>,
}

impl UnmatchedReport {
    pub fn is_empty(&self) -> bool {
        self.records_without_counterfactual.is_empty() && self.counterfactuals_without_record.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records_without_counterfactual.len() + self.counterfactuals_without_record.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltExamples {
    pub examples: Vec<TrainingExample>,
    pub unmatched: UnmatchedReport,
}

fn explanation(record: &DistillationRecord, source: ExplanationSource) -> Result<&str, BuildError> {
    match source {
        ExplanationSource::Unrevised => Ok(&record.e),
        ExplanationSource::Revised => {
            record.e_prime.as_deref().ok_or_else(|| BuildError::MissingRevision(record.question_id.clone()))
        }
    }
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>, what: &'static str) -> Result<(), BuildError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(BuildError::DuplicateId(id.to_string(), what));
        }
    }
    Ok(())
}

/// Two examples per record: `[answer] q -> gold text` and
/// `[explain] q -> e` (or `e'` for the revised source).
pub fn build_multitask(records: &[DistillationRecord], source: ExplanationSource) -> Result<Vec<TrainingExample>, BuildError> {
    check_unique(records.iter().map(|r| r.question_id.as_str()), "distillation records")?;
    let mut out = Vec::with_capacity(records.len() * 2);
    for r in records {
        r.validate().map_err(BuildError::InvalidRecord)?;
        let e = explanation(r, source)?;
        out.push(TrainingExample {
            question_id: r.question_id.clone(),
            input_text: TaskMode::Answer.input(&r.q),
            target_text: r.q.answer_text().trim().to_string(),
            tag: TaskTag::Answer,
        });
        out.push(TrainingExample {
            question_id: r.question_id.clone(),
            input_text: TaskMode::Explain.input(&r.q),
            target_text: e.to_string(),
            tag: TaskTag::Explain,
        });
    }
    Ok(out)
}

/// Student input for the incorrect-path task: question plus the misleading explanation.
pub fn counterfactual_input(q: &MCQuestion, e_star: &str) -> String {
    format!("{}\nExplanation: {}", TaskMode::Answer.input(q), e_star.trim())
}

/// Two examples per matched question: the correct path and
/// `q + e* -> a*` text. Questions present on one side only are reported.
pub fn build_counterfactual(
    records: &[DistillationRecord],
    cf_records: &[CounterfactualRecord],
    source: ExplanationSource,
    cf_target: CfCorrectTarget,
) -> Result<BuiltExamples, BuildError> {
    check_unique(records.iter().map(|r| r.question_id.as_str()), "distillation records")?;
    check_unique(cf_records.iter().map(|r| r.question_id.as_str()), "counterfactual records")?;
    let by_id: HashMap<&str, &CounterfactualRecord> = cf_records.iter().map(|c| (c.question_id.as_str(), c)).collect();
    let record_ids: HashSet<&str> = records.iter().map(|r| r.question_id.as_str()).collect();
    let mut unmatched = UnmatchedReport::default();
    let mut examples = Vec::new();
    for r in records {
        r.validate().map_err(BuildError::InvalidRecord)?;
        let Some(cf) = by_id.get(r.question_id.as_str()) else {
            unmatched.records_without_counterfactual.push(r.question_id.clone());
            continue;
        };
        cf.validate(&r.q).map_err(BuildError::InvalidRecord)?;
        let gold = r.q.answer_text().trim();
        let correct_target = match cf_target {
            CfCorrectTarget::Answer => gold.to_string(),
            CfCorrectTarget::ExplanationThenAnswer => {
                format!("{} {ANSWER_MARKER} {gold}.", explanation(r, source)?.trim())
            }
        };
        examples.push(TrainingExample {
            question_id: r.question_id.clone(),
            input_text: TaskMode::Answer.input(&r.q),
            target_text: correct_target,
            tag: TaskTag::CfCorrect,
        });
        examples.push(TrainingExample {
            question_id: r.question_id.clone(),
            input_text: counterfactual_input(&r.q, &cf.e_star),
            target_text: r.q.choice_text(cf.a_star).unwrap_or_default().trim().to_string(),
            tag: TaskTag::CfIncorrect,
        });
    }
    unmatched.counterfactuals_without_record = cf_records
        .iter()
        .filter(|c| !record_ids.contains(c.question_id.as_str()))
        .map(|c| c.question_id.clone())
        .collect();
    if !unmatched.is_empty() {
        tracing::warn!(count = unmatched.len(), "unmatched counterfactual questions");
    }
    Ok(BuiltExamples { examples, unmatched })
}

/// Multitask and counterfactual examples together, shuffled by `seed`.
pub fn build_combined(
    records: &[DistillationRecord],
    cf_records: &[CounterfactualRecord],
    source: ExplanationSource,
    cf_target: CfCorrectTarget,
    seed: u64,
) -> Result<BuiltExamples, BuildError> {
    let mut examples = build_multitask(records, source)?;
    let cf = build_counterfactual(records, cf_records, source, cf_target)?;
    examples.extend(cf.examples);
    rng::shuffle(&mut examples, seed, "train.combined");
    Ok(BuiltExamples { examples, unmatched: cf.unmatched })
}

/// Dispatches on the variant's training method.
pub fn build_for_variant(
    variant: ModelVariant,
    records: &[DistillationRecord],
    cf_records: &[CounterfactualRecord],
    cf_target: CfCorrectTarget,
    seed: u64,
) -> Result<BuiltExamples, BuildError> {
    match variant.method {
        TrainingMethod::Multitask => Ok(BuiltExamples {
            examples: build_multitask(records, variant.source)?,
            unmatched: UnmatchedReport::default(),
        }),
        TrainingMethod::Counterfactual => build_counterfactual(records, cf_records, variant.source, cf_target),
        TrainingMethod::Combined => build_combined(records, cf_records, variant.source, cf_target, seed),
    }
}

pub fn tag_histogram(examples: &[TrainingExample]) -> BTreeMap<TaskTag, usize> {
    let mut h = BTreeMap::new();
    for e in examples {
        *h.entry(e.tag).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Choice, LABELS};
    use crate::datagen::Provenance;
    use crate::teacher::GenerationParams;

    fn record(i: usize) -> DistillationRecord {
        let q = MCQuestion {
            id: format!("q{i}"),
            stem: format!("question {i}?"),
            choices: LABELS.iter().map(|&l| Choice { label: l, text: format!("choice {l}{i}") }).collect(),
            answer_label: LABELS[i % 5],
        };
        DistillationRecord {
            question_id: q.id.clone(),
            a: q.answer_label,
            q,
            e: "X".into(),
            c: Some("crit".into()),
            e_prime: Some("Y".into()),
            provenance: Provenance { params: GenerationParams::default(), steps: vec![] },
        }
    }

    fn cf(r: &DistillationRecord) -> CounterfactualRecord {
        CounterfactualRecord {
            question_id: r.question_id.clone(),
            a_star: crate::datagen::sample_incorrect_answer(&r.q, 1),
            e_star: "misleading".into(),
            provenance: r.provenance.clone(),
        }
    }

    #[test]
    fn multitask_counts_and_prefixes() {
        let recs: Vec<_> = (0..10).map(record).collect();
        let ex = build_multitask(&recs, ExplanationSource::Unrevised).unwrap();
        assert_eq!(ex.len(), 20);
        let h = tag_histogram(&ex);
        assert_eq!(h[&TaskTag::Answer], 10);
        assert_eq!(h[&TaskTag::Explain], 10);
        for e in &ex {
            match e.tag {
                TaskTag::Answer => assert!(e.input_text.starts_with("[answer] ")),
                _ => assert!(e.input_text.starts_with("[explain] ")),
            }
        }
        assert!(build_multitask(&[], ExplanationSource::Revised).unwrap().is_empty());
    }

    #[test]
    fn revised_source_selects_e_prime() {
        let ex = build_multitask(&[record(0)], ExplanationSource::Revised).unwrap();
        assert_eq!(ex[1].target_text, "Y");
        let mut unrevised = record(1);
        unrevised.c = None;
        unrevised.e_prime = None;
        assert_eq!(
            build_multitask(&[unrevised], ExplanationSource::Revised),
            Err(BuildError::MissingRevision("q1".into()))
        );
    }

    #[test]
    fn counterfactual_reports_unmatched_and_never_targets_gold() {
        let recs: Vec<_> = (0..10).map(record).collect();
        let cfs: Vec<_> = recs.iter().take(9).map(cf).collect();
        let built = build_counterfactual(&recs, &cfs, ExplanationSource::Unrevised, CfCorrectTarget::Answer).unwrap();
        assert_eq!(built.examples.len(), 18);
        assert_eq!(built.unmatched.records_without_counterfactual, vec!["q9".to_string()]);
        for (e, r) in built.examples.iter().filter(|e| e.tag == TaskTag::CfIncorrect).zip(&recs) {
            assert_eq!(e.question_id, r.question_id);
            assert_ne!(e.target_text, r.q.answer_text());
            assert!(e.input_text.ends_with("misleading"));
        }
    }

    #[test]
    fn explanation_then_answer_target() {
        let r = record(2);
        let built = build_counterfactual(&[r.clone()], &[cf(&r)], ExplanationSource::Revised, CfCorrectTarget::ExplanationThenAnswer)
            .unwrap();
        assert_eq!(built.examples[0].target_text, "Y So the answer is choice C2.");
    }

    #[test]
    fn duplicates_are_rejected() {
        let r = record(0);
        let err = build_counterfactual(&[r.clone(), r.clone()], &[], ExplanationSource::Unrevised, CfCorrectTarget::Answer);
        assert!(matches!(err, Err(BuildError::DuplicateId(..))));
        let err = build_counterfactual(&[r.clone()], &[cf(&r), cf(&r)], ExplanationSource::Unrevised, CfCorrectTarget::Answer);
        assert!(matches!(err, Err(BuildError::DuplicateId(_, "counterfactual records"))));
    }

    #[test]
    fn combined_is_a_seeded_shuffle_of_the_union() {
        let recs: Vec<_> = (0..10).map(record).collect();
        let cfs: Vec<_> = recs.iter().map(cf).collect();
        let a = build_combined(&recs, &cfs, ExplanationSource::Unrevised, CfCorrectTarget::Answer, 3).unwrap();
        let b = build_combined(&recs, &cfs, ExplanationSource::Unrevised, CfCorrectTarget::Answer, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.examples.len(), 40);
        assert!(tag_histogram(&a.examples).values().all(|&n| n == 10));
        let mut union = build_multitask(&recs, ExplanationSource::Unrevised).unwrap();
        union.extend(build_counterfactual(&recs, &cfs, ExplanationSource::Unrevised, CfCorrectTarget::Answer).unwrap().examples);
        let mut sorted_a = a.examples.clone();
        sorted_a.sort_by(|x, y| (&x.question_id, x.tag, &x.input_text).cmp(&(&y.question_id, y.tag, &y.input_text)));
        union.sort_by(|x, y| (&x.question_id, x.tag, &x.input_text).cmp(&(&y.question_id, y.tag, &y.input_text)));
        assert_eq!(sorted_a, union);
    }
}
