use std::sync::Arc;

use distill_core::corpus::{DatasetSplit, SplitName};
use distill_core::datagen::{build_distillation_dataset, Generator};
use distill_core::evaluation::{accuracy, extract_answer};
use distill_core::synthetic::keyword_questions;
use distill_core::teacher::{GenerationParams, StubTeacher, TeacherClient, TemplateSet};
use distill_core::train::{build_multitask, fit_tokenizer, generate_answer, train, TaskMode, TrainingConfig};
use distill_core::{ExplanationSource, MlpStudentF32, ModelVariant};

#[test]
fn multitask_student_learns_keyword_questions() {
    let questions = keyword_questions(200, 1);
    let (train_q, test_q) = questions.split_at(150);
    let client = TeacherClient::new(Arc::new(StubTeacher::new("stub")));
    let templates = TemplateSet::default_set();
    let params = GenerationParams::default();
    let g = Generator { teacher: &client, templates: &templates, params: &params };
    let split = DatasetSplit::new(SplitName::Train, train_q.to_vec());
    let records = build_distillation_dataset(&split, &g, false, 0.0).unwrap().records;
    let examples = build_multitask(&records, ExplanationSource::Unrevised).unwrap();
    let tokenizer = fit_tokenizer(&examples, test_q.iter().map(|q| q.stem.as_str()));
    let student = MlpStudentF32::new(tokenizer, 32, 64, 32, 3);
    let config = TrainingConfig { max_steps: 500, learning_rate: 1e-2, weight_decay: 0.1, batch_size: 32, eval_every: 100, seed: 3, ..Default::default() };
    let run = train(&config, &examples, student, None).unwrap();
    let preds: Vec<_> = test_q
        .iter()
        .map(|q| extract_answer(&generate_answer(&run.student, q, TaskMode::Answer, 8).text, q))
        .collect();
    let acc = accuracy(&preds, test_q, ModelVariant::MT_UNREVISED, "toy", 3).unwrap();
    assert!(acc.accuracy >= 0.9, "held-out accuracy {}", acc.accuracy);
    assert!(run.metrics.last().unwrap().total < run.metrics[0].total);
}
