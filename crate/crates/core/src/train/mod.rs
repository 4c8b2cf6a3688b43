//! Student training: example builders, the composite loss, the built-in
//! student, AdamW, the training loop and checkpoints.

mod checkpoint;
mod dataset;
mod examples;
mod loss;
mod optim;
mod student;
mod tokenizer;
mod trainer;

pub use checkpoint::{
    load_manifest, load_student, run_id, save_checkpoint, CheckpointManifest, MANIFEST_FILE, METRICS_FILE, WEIGHTS_FILE,
};
pub use dataset::{read_examples, write_examples, ExamplesHeader, EXAMPLES_SCHEMA};
pub use examples::{
    build_combined, build_counterfactual, build_for_variant, build_multitask, counterfactual_input, tag_histogram,
    BuildError, BuiltExamples, CfCorrectTarget, TaskMode, TaskTag, TrainingExample, UnmatchedReport, ANSWER_MARKER,
};
pub use loss::{compute_loss, compute_loss_and_grad, LossBreakdown};
pub use optim::{AdamW, AdamWConfig};
pub use student::{random_unit_direction, MlpDims, MlpStudent, Seq2SeqStudent};
pub use tokenizer::{split_words, Tokenizer};
pub use trainer::{
    generate_answer, reject_overlong, train, write_metrics, MetricsEntry, StudentOutput, TrainRun, TrainingConfig,
    MAX_STEPS_CAP,
};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("no training examples")]
    NoExamples,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("loss diverged at step {step}: total = {total}; lower the learning rate")]
    Diverged { step: usize, total: f64 },
    #[error("training data error: {0}")]
    Data(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Build(#[from] BuildError),
}

/// Tokenizer covering every input and target in `examples` plus the given
/// extra texts (e.g. evaluation questions).
pub fn fit_tokenizer<'a>(examples: &'a [TrainingExample], extra: impl IntoIterator<Item = &'a str>) -> Tokenizer {
    Tokenizer::fit(
        examples
            .iter()
            .flat_map(|e| [e.input_text.as_str(), e.target_text.as_str()])
            .chain(extra),
    )
}
