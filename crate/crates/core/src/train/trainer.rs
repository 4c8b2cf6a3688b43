use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::examples::{CfCorrectTarget, TaskMode, TrainingExample};
use super::loss::{compute_loss, compute_loss_and_grad, LossBreakdown};
use super::optim::{AdamW, AdamWConfig};
use super::student::Seq2SeqStudent;
use super::TrainError;
use crate::corpus::MCQuestion;
use crate::rng;
use crate::Scalar;

pub const MAX_STEPS_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub max_steps: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Only `"adamw"` is implemented.
    pub optimizer: String,
    pub max_gen_tokens: usize,
    pub seed: u64,
    pub batch_size: usize,
    pub eval_every: usize,
    pub student_id: String,
    /// `None` picks the per-method default, see [`CfCorrectTarget::default_for`].
    pub cf_correct_target: Option<CfCorrectTarget>,
    /// Omit wall-clock timestamps so identical runs produce identical logs.
    pub deterministic: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            max_steps: 5000,
            learning_rate: 5e-5,
            weight_decay: 0.01,
            optimizer: "adamw".into(),
            max_gen_tokens: 300,
            seed: 0,
            batch_size: 8,
            eval_every: 500,
            student_id: "mlp-seq2seq".into(),
            cf_correct_target: None,
            deterministic: false,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.max_steps > MAX_STEPS_CAP {
            return bad(format!("max_steps {} exceeds the cap of {MAX_STEPS_CAP}", self.max_steps));
        }
        if self.batch_size == 0 || self.eval_every == 0 || self.max_gen_tokens == 0 {
            return bad("batch_size, eval_every and max_gen_tokens must be positive".into());
        }
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning_rate {} must be > 0", self.learning_rate));
        }
        if self.optimizer != "adamw" {
            return bad(format!("unsupported optimizer `{}`", self.optimizer));
        }
        Ok(())
    }

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig { learning_rate: self.learning_rate, weight_decay: self.weight_decay, ..AdamWConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsEntry {
    pub step: usize,
    pub losses: BTreeMap<String, f64>,
    pub total: f64,
    pub lr: f64,
    pub timestamp: Option<chrono::DateTime<chrono::Utc>>,
}

#[derive(Debug)]
pub struct TrainRun<S> {
    pub student: S,
    pub metrics: Vec<MetricsEntry>,
    /// Loss on the evaluation examples before the first update.
    pub initial_eval: Option<LossBreakdown<f64>>,
    /// Examples dropped because their targets exceed the student's limit.
    pub rejected_overlong: Vec<String>,
}

/// Splits off examples whose targets the student cannot score.
pub fn reject_overlong<T: Scalar, S: Seq2SeqStudent<T> + ?Sized>(
    student: &S,
    examples: &[TrainingExample],
) -> (Vec<TrainingExample>, Vec<String>) {
    let limit = student.max_target_len();
    let (keep, drop): (Vec<_>, Vec<_>) =
        examples.iter().cloned().partition(|e| student.target_len(&e.target_text) <= limit);
    (keep, drop.into_iter().map(|e| format!("{}:{}", e.question_id, e.tag)).collect())
}

/// Runs `config.max_steps` AdamW updates over seeded shuffles of `examples`.
///
/// Every `eval_every` steps (and after the last step) the loss breakdown on
/// `eval` (or on the current batch when `eval` is `None`) is appended to the
/// metrics log.
pub fn train<T: Scalar, S: Seq2SeqStudent<T>>(
    config: &TrainingConfig,
    examples: &[TrainingExample],
    mut student: S,
    eval: Option<&[TrainingExample]>,
) -> Result<TrainRun<S>, TrainError> {
    config.validate()?;
    if examples.is_empty() {
        return Err(TrainError::NoExamples);
    }
    let (examples, rejected_overlong) = reject_overlong(&student, examples);
    if !rejected_overlong.is_empty() {
        tracing::warn!(count = rejected_overlong.len(), "dropped examples with over-long targets");
    }
    if examples.is_empty() {
        return Err(TrainError::NoExamples);
    }
    let eval = eval.filter(|e| !e.is_empty());
    let initial_eval = eval.map(|e| compute_loss(&student, e).map(|l| l.to_f64())).transpose()?;

    let mut optimizer = AdamW::new(config.adamw(), student.params().len());
    let mut grad = vec![T::zero(); student.params().len()];
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut epoch = 0;
    let mut metrics = Vec::new();

    for step in 1..=config.max_steps {
        let mut batch = Vec::with_capacity(config.batch_size);
        while batch.len() < config.batch_size.min(examples.len()) {
            if cursor == order.len() {
                order = (0..examples.len()).collect();
                rng::shuffle(&mut order, config.seed, &format!("train.epoch:{epoch}"));
                epoch += 1;
                cursor = 0;
            }
            batch.push(examples[order[cursor]].clone());
            cursor += 1;
        }
        let loss = compute_loss_and_grad(&student, &batch, &mut grad)?;
        if !loss.total.is_finite() {
            return Err(TrainError::Diverged { step, total: loss.total.as_f64() });
        }
        optimizer.step(student.params_mut(), &grad);

        if step % config.eval_every == 0 || step == config.max_steps {
            let logged = match eval {
                Some(e) => compute_loss(&student, e)?.to_f64(),
                None => loss.to_f64(),
            };
            if !logged.total.is_finite() {
                return Err(TrainError::Diverged { step, total: logged.total });
            }
            tracing::info!(step, total = logged.total, "training progress");
            metrics.push(MetricsEntry {
                step,
                losses: logged.per_tag.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
                total: logged.total,
                lr: config.learning_rate,
                timestamp: (!config.deterministic).then(chrono::Utc::now),
            });
        }
    }
    Ok(TrainRun { student, metrics, initial_eval, rejected_overlong })
}

pub fn write_metrics(path: impl AsRef<Path>, metrics: &[MetricsEntry]) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    for m in metrics {
        writeln!(file, "{}", serde_json::to_string(m).expect("metrics serialize"))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentOutput {
    pub input: String,
    pub text: String,
    pub tokens: usize,
}

/// Greedy decoding with the task label for `mode` in front of the question.
pub fn generate_answer<T: Scalar, S: Seq2SeqStudent<T> + ?Sized>(
    student: &S,
    q: &MCQuestion,
    mode: TaskMode,
    max_gen_tokens: usize,
) -> StudentOutput {
    let input = mode.input(q);
    let (text, tokens) = student.generate(&input, max_gen_tokens);
    StudentOutput { input, text, tokens }
}
