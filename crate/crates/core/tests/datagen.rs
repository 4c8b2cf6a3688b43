use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use distill_core::corpus::{DatasetSplit, SplitName};
use distill_core::datagen::{
    build_counterfactual_dataset, build_distillation_dataset, read_records, to_ndjson, write_records, CounterfactualRecord,
    DatagenError, DistillationRecord, Generator, DEFAULT_FAILURE_THRESHOLD,
};
use distill_core::synthetic::keyword_questions;
use distill_core::teacher::{BackendError, GenerationCache, GenerationParams, StubTeacher, TeacherClient, TemplateSet, TextGenerator};

fn split(n: usize) -> DatasetSplit {
    DatasetSplit::new(SplitName::Train, keyword_questions(n, 21))
}

/// Fails every prompt for question stems containing `poison` until healed.
struct Flaky {
    inner: StubTeacher,
    poison: &'static str,
    healed: std::sync::atomic::AtomicBool,
    calls: AtomicUsize,
}

impl TextGenerator for Flaky {
    fn model_id(&self) -> &str {
        "stub"
    }
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let query = prompt.rsplit("Question:").next().unwrap_or("");
        if !self.healed.load(Ordering::SeqCst) && query.contains(self.poison) {
            return Err(BackendError::Status(400));
        }
        self.inner.complete(prompt, params)
    }
}

#[test]
fn revision_fills_every_field_and_a_warm_rerun_is_free() {
    let dir = tempfile::tempdir().unwrap();
    let stub = Arc::new(StubTeacher::new("stub"));
    let client = TeacherClient::new(stub.clone()).with_cache(GenerationCache::open(dir.path()).unwrap());
    let templates = TemplateSet::default_set();
    let params = GenerationParams::default();
    let g = Generator { teacher: &client, templates: &templates, params: &params };
    let data = split(30);

    let cold = build_distillation_dataset(&data, &g, true, DEFAULT_FAILURE_THRESHOLD).unwrap();
    assert_eq!(cold.records.len(), 30);
    assert_eq!(stub.calls(), 90);
    for r in &cold.records {
        r.validate().unwrap();
        assert!(!r.e.is_empty() && !r.c.as_deref().unwrap().is_empty() && !r.e_prime.as_deref().unwrap().is_empty());
        assert_eq!(r.provenance.steps.len(), 3);
    }
    let warm = build_distillation_dataset(&data, &g, true, DEFAULT_FAILURE_THRESHOLD).unwrap();
    assert_eq!(stub.calls(), 90, "warm rerun must not call the backend");
    assert_eq!(to_ndjson(&cold.records, "stub"), to_ndjson(&warm.records, "stub"));

    let path = dir.path().join("out/distill.jsonl");
    write_records(&path, &warm.records, "stub").unwrap();
    let (header, back) = read_records::<DistillationRecord>(&path).unwrap();
    assert_eq!(back, warm.records);
    assert_eq!(header.model_id, "stub");
    assert!(read_records::<CounterfactualRecord>(&path).is_err());
}

#[test]
fn unrevised_build_has_no_critique() {
    let stub = Arc::new(StubTeacher::new("stub"));
    let client = TeacherClient::new(stub.clone());
    let templates = TemplateSet::default_set();
    let params = GenerationParams::default();
    let g = Generator { teacher: &client, templates: &templates, params: &params };
    let b = build_distillation_dataset(&split(5), &g, false, 0.0).unwrap();
    assert!(b.records.iter().all(|r| r.c.is_none() && r.e_prime.is_none()));
    assert_eq!(stub.calls(), 5);
}

#[test]
fn interrupted_generation_resumes_from_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let flaky = Arc::new(Flaky {
        inner: StubTeacher::new("stub"),
        poison: "hoot",
        healed: false.into(),
        calls: AtomicUsize::new(0),
    });
    let client = TeacherClient::new(flaky.clone()).with_cache(GenerationCache::open(dir.path()).unwrap());
    let templates = TemplateSet::default_set();
    let params = GenerationParams::default();
    let g = Generator { teacher: &client, templates: &templates, params: &params };
    let data = split(40);
    let poisoned = data.questions.iter().filter(|q| q.stem.contains("hoot")).count();
    assert!(poisoned > 0);

    match build_distillation_dataset(&data, &g, true, DEFAULT_FAILURE_THRESHOLD) {
        Err(DatagenError::FailureRateExceeded { failed, total: 40, failures, .. }) => {
            assert_eq!(failed, poisoned);
            assert!(failures.iter().all(|f| !f.needs_regeneration));
        }
        other => panic!("{:?}", other.map(|b| b.records.len())),
    }
    let lenient = build_distillation_dataset(&data, &g, true, 1.0).unwrap();
    assert_eq!(lenient.records.len(), 40 - poisoned);

    flaky.healed.store(true, Ordering::SeqCst);
    let before = flaky.calls.load(Ordering::SeqCst);
    let healed = build_distillation_dataset(&data, &g, true, DEFAULT_FAILURE_THRESHOLD).unwrap();
    assert_eq!(healed.records.len(), 40);
    assert_eq!(flaky.calls.load(Ordering::SeqCst) - before, 3 * poisoned, "only the missing steps are generated");
}

#[test]
fn counterfactuals_never_use_the_gold_label_and_are_stable() {
    let stub = Arc::new(StubTeacher::new("stub"));
    let client = TeacherClient::new(stub);
    let templates = TemplateSet::default_set();
    let params = GenerationParams::default();
    let g = Generator { teacher: &client, templates: &templates, params: &params };
    let data = split(60);
    let a = build_counterfactual_dataset(&data, &g, 7, 0.0).unwrap();
    let b = build_counterfactual_dataset(&data, &g, 7, 0.0).unwrap();
    for (r, q) in a.records.iter().zip(&data.questions) {
        r.validate(q).unwrap();
        assert_ne!(r.a_star, q.answer_label);
        let wrong_text = q.choice_text(r.a_star).unwrap();
        assert!(r.e_star.contains(wrong_text), "explanation argues for the sampled answer");
    }
    let stars = |x: &[CounterfactualRecord]| x.iter().map(|r| r.a_star).collect::<Vec<_>>();
    assert_eq!(stars(&a.records), stars(&b.records));
}
