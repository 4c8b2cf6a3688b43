//! Deterministic offline teacher for dry runs and tests.

use std::sync::atomic::{AtomicUsize, Ordering};

use super::backend::{BackendError, GenerationParams, TextGenerator};

/// Answers from the last `Question:` / `Answer:` / `Explanation:` lines of
/// the prompt (the query follows any exemplars), choosing the reply form from
/// the final cue line. Counts every call.
#[derive(Debug, Default)]
pub struct StubTeacher {
    model_id: String,
    calls: AtomicUsize,
}

fn last_field<'a>(prompt: &'a str, name: &str) -> &'a str {
    prompt
        .lines()
        .filter_map(|l| l.strip_prefix(name))
        .last()
        .map(str::trim)
        .unwrap_or("")
}

impl StubTeacher {
    pub fn new(model_id: impl Into<String>) -> Self {
        Self { model_id: model_id.into(), calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reply(prompt: &str) -> String {
        let stem = last_field(prompt, "Question:");
        let answer = last_field(prompt, "Answer:");
        let answer_text = answer.split_once(") ").map(|(_, t)| t).unwrap_or(answer);
        let cue = prompt.trim_end().lines().last().unwrap_or("").trim();
        match cue {
            "Critique:" => format!("The explanation should say why {answer_text} fits better than the other choices."),
            "Revised explanation:" => {
                let e = last_field(prompt, "Explanation:");
                format!("{e} The other choices do not match the question as well as {answer_text} does.")
            }
            _ => format!("The question says \"{stem}\", and that points to {answer_text}."),
        }
    }
}

impl TextGenerator for StubTeacher {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(&self, prompt: &str, _params: &GenerationParams) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(Self::reply(prompt))
    }
}
