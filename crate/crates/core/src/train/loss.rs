//! Composite training loss.
//!
//! Each example contributes the mean token cross-entropy of its target under
//! teacher forcing. Within a batch, examples are averaged per task tag and the
//! per-tag means are added with unit weights, so the multitask loss is
//! `answer + explain`, the counterfactual loss is `cf_correct + cf_incorrect`,
//! and the combined loss is the sum of all four.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::examples::{TaskTag, TrainingExample};
use super::student::Seq2SeqStudent;
use super::TrainError;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LossBreakdown<T> {
    pub per_tag: BTreeMap<TaskTag, T>,
    pub total: T,
}

impl<T: Scalar> LossBreakdown<T> {
    fn component(&self, tags: &[TaskTag]) -> Option<T> {
        let present: Vec<T> = tags.iter().filter_map(|t| self.per_tag.get(t).copied()).collect();
        (!present.is_empty()).then(|| present.into_iter().sum())
    }

    /// `answer + explain`, when either is present.
    pub fn multitask(&self) -> Option<T> {
        self.component(&[TaskTag::Answer, TaskTag::Explain])
    }

    /// `cf_correct + cf_incorrect`, when either is present.
    pub fn counterfactual(&self) -> Option<T> {
        self.component(&[TaskTag::CfCorrect, TaskTag::CfIncorrect])
    }

    pub fn to_f64(&self) -> LossBreakdown<f64> {
        LossBreakdown {
            per_tag: self.per_tag.iter().map(|(k, v)| (*k, v.as_f64())).collect(),
            total: self.total.as_f64(),
        }
    }
}

fn tag_counts(batch: &[TrainingExample]) -> BTreeMap<TaskTag, usize> {
    let mut counts = BTreeMap::new();
    for ex in batch {
        *counts.entry(ex.tag).or_insert(0usize) += 1;
    }
    counts
}

fn assemble<T: Scalar>(sums: BTreeMap<TaskTag, T>, counts: &BTreeMap<TaskTag, usize>) -> LossBreakdown<T> {
    let per_tag: BTreeMap<TaskTag, T> = sums.into_iter().map(|(tag, s)| (tag, s / T::of_usize(counts[&tag]))).collect();
    let total = per_tag.values().copied().sum();
    LossBreakdown { per_tag, total }
}

pub fn compute_loss<T: Scalar, S: Seq2SeqStudent<T> + ?Sized>(
    student: &S,
    batch: &[TrainingExample],
) -> Result<LossBreakdown<T>, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let counts = tag_counts(batch);
    let mut sums: BTreeMap<TaskTag, T> = BTreeMap::new();
    for ex in batch {
        *sums.entry(ex.tag).or_insert(T::zero()) += student.sequence_loss(&ex.input_text, &ex.target_text);
    }
    Ok(assemble(sums, &counts))
}

/// Loss plus its gradient with respect to every parameter, written into `grad`
/// (which is zeroed first).
pub fn compute_loss_and_grad<T: Scalar, S: Seq2SeqStudent<T> + ?Sized>(
    student: &S,
    batch: &[TrainingExample],
    grad: &mut [T],
) -> Result<LossBreakdown<T>, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    grad.iter_mut().for_each(|g| *g = T::zero());
    let counts = tag_counts(batch);
    let mut sums: BTreeMap<TaskTag, T> = BTreeMap::new();
    for ex in batch {
        let scale = T::one() / T::of_usize(counts[&ex.tag]);
        let loss = student.sequence_loss_grad(&ex.input_text, &ex.target_text, scale, grad);
        *sums.entry(ex.tag).or_insert(T::zero()) += loss;
    }
    Ok(assemble(sums, &counts))
}
