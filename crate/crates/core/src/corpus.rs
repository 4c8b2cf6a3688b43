//! Multiple-choice QA datasets: ingestion, validation and seeded sampling.
//!
//! Input files are newline-delimited JSON, one question per line:
//!
//! ```json
//! {"id": "q1", "question": "Where ...?", "choices": [{"label": "A", "text": "bank"}, ...], "answerKey": "A"}
//! ```
//!
//! The nested public-release form (`"question": {"stem": ..., "choices": [...]}`)
//! is accepted as well.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::rng;

pub const LABELS: [char; 5] = ['A', 'B', 'C', 'D', 'E'];

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read dataset {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("duplicate question id `{id}` on line {line}")]
    DuplicateId { id: String, line: usize },
    #[error("line {}: {}", .0.line, .0.reason)]
    Malformed(LineError),
    #[error("cannot sample {requested} questions from a split of {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("unknown split name `{0}`")]
    UnknownSplit(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub label: char,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MCQuestion {
    pub id: String,
    pub stem: String,
    pub choices: Vec<Choice>,
    pub answer_label: char,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QuestionInvalid {
    #[error("empty id")]
    EmptyId,
    #[error("expected 5 choices, found {0}")]
    ChoiceCount(usize),
    #[error("choice label `{0}` is not one of A-E")]
    BadLabel(char),
    #[error("choice label `{0}` repeated")]
    RepeatedLabel(char),
    #[error("choice `{0}` has empty text")]
    EmptyChoiceText(char),
    #[error("answer label `{0}` is not among the choices")]
    AnswerNotAChoice(char),
}

impl MCQuestion {
    pub fn validate(&self) -> Result<(), QuestionInvalid> {
        if self.id.trim().is_empty() {
            return Err(QuestionInvalid::EmptyId);
        }
        if self.choices.len() != LABELS.len() {
            return Err(QuestionInvalid::ChoiceCount(self.choices.len()));
        }
        let mut seen = HashSet::new();
        for choice in &self.choices {
            if !LABELS.contains(&choice.label) {
                return Err(QuestionInvalid::BadLabel(choice.label));
            }
            if !seen.insert(choice.label) {
                return Err(QuestionInvalid::RepeatedLabel(choice.label));
            }
            if choice.text.trim().is_empty() {
                return Err(QuestionInvalid::EmptyChoiceText(choice.label));
            }
        }
        if !seen.contains(&self.answer_label) {
            return Err(QuestionInvalid::AnswerNotAChoice(self.answer_label));
        }
        Ok(())
    }

    pub fn choice(&self, label: char) -> Option<&Choice> {
        self.choices.iter().find(|c| c.label == label)
    }

    pub fn choice_text(&self, label: char) -> Option<&str> {
        self.choice(label).map(|c| c.text.as_str())
    }

    /// Text of the gold choice.
    pub fn answer_text(&self) -> &str {
        self.choice_text(self.answer_label).unwrap_or_default()
    }

    pub fn labels(&self) -> impl Iterator<Item = char> + '_ {
        self.choices.iter().map(|c| c.label)
    }

    /// Stem followed by one `(X) text` line per choice.
    pub fn render(&self) -> String {
        let mut out = self.stem.trim().to_string();
        for c in &self.choices {
            out.push('\n');
            out.push_str(&format!("({}) {}", c.label, c.text.trim()));
        }
        out
    }

    /// Choices on one line, `(A) x (B) y ...`; used inside teacher prompts.
    pub fn render_choices_inline(&self) -> String {
        self.choices
            .iter()
            .map(|c| format!("({}) {}", c.label, c.text.trim()))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Test,
    /// Reserved for a model-selection split; nothing in the pipeline reads it yet.
    Validation,
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Train => "train",
            Self::Test => "test",
            Self::Validation => "validation",
        })
    }
}

impl FromStr for SplitName {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Self::Train),
            "test" => Ok(Self::Test),
            "validation" | "dev" => Ok(Self::Validation),
            other => Err(CorpusError::UnknownSplit(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub name: SplitName,
    pub questions: Vec<MCQuestion>,
    /// Hex SHA-256 of the source bytes (or of the derived content for samples).
    pub source_fingerprint: String,
}

impl DatasetSplit {
    pub fn new(name: SplitName, questions: Vec<MCQuestion>) -> Self {
        let source_fingerprint = fingerprint_questions(&questions);
        Self { name, questions, source_fingerprint }
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&MCQuestion> {
        self.questions.iter().find(|q| q.id == id)
    }
}

/// One rejected input line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadReport {
    pub split: DatasetSplit,
    pub rejected: Vec<LineError>,
}

impl LoadReport {
    /// Rejections as the JSON array `[{line, reason}, ...]`.
    pub fn error_report_json(&self) -> String {
        serde_json::to_string_pretty(&self.rejected).expect("line errors serialize")
    }
}

#[derive(Deserialize)]
struct RawChoice {
    label: String,
    text: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawQuestionField {
    Stem(String),
    Nested { stem: String, choices: Vec<RawChoice> },
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawRecord {
    id: String,
    question: RawQuestionField,
    #[serde(default)]
    choices: Option<Vec<RawChoice>>,
    answer_key: String,
}

fn single_letter(s: &str, what: &str) -> Result<char, String> {
    let mut chars = s.trim().chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(format!("{what} `{s}` is not a single letter")),
    }
}

/// Parses and validates one record; never repairs it.
pub fn parse_record(line: &str) -> Result<MCQuestion, String> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| format!("invalid JSON record: {e}"))?;
    let (stem, nested) = match raw.question {
        RawQuestionField::Stem(s) => (s, None),
        RawQuestionField::Nested { stem, choices } => (stem, Some(choices)),
    };
    let raw_choices = raw.choices.or(nested).ok_or_else(|| "missing `choices`".to_string())?;
    let choices = raw_choices
        .into_iter()
        .map(|c| Ok(Choice { label: single_letter(&c.label, "choice label")?, text: c.text }))
        .collect::<Result<Vec<_>, String>>()?;
    let question = MCQuestion {
        id: raw.id,
        stem,
        choices,
        answer_label: single_letter(&raw.answer_key, "answerKey")?,
    };
    question.validate().map_err(|e| e.to_string())?;
    Ok(question)
}

/// Parses an NDJSON dataset held in memory. Blank lines are ignored.
pub fn parse_split(bytes: &[u8], name: SplitName, strict: bool) -> Result<LoadReport, CorpusError> {
    let text = String::from_utf8_lossy(bytes);
    let mut questions = Vec::new();
    let mut rejected = Vec::new();
    let mut ids = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(line) {
            Ok(q) => {
                if !ids.insert(q.id.clone()) {
                    return Err(CorpusError::DuplicateId { id: q.id, line: line_no });
                }
                questions.push(q);
            }
            Err(reason) => {
                let err = LineError { line: line_no, reason };
                if strict {
                    return Err(CorpusError::Malformed(err));
                }
                rejected.push(err);
            }
        }
    }
    if !rejected.is_empty() {
        tracing::warn!(count = rejected.len(), "rejected malformed dataset records");
    }
    let split = DatasetSplit { name, questions, source_fingerprint: fingerprint_bytes(bytes) };
    tracing::info!(split = %name, questions = split.len(), "loaded dataset split");
    Ok(LoadReport { split, rejected })
}

/// Loads a split from disk, collecting malformed lines into the report.
pub fn load_split(path: impl AsRef<Path>, name: SplitName) -> Result<LoadReport, CorpusError> {
    load_split_with(path, name, false)
}

/// As [`load_split`]; with `strict` the first malformed line aborts the load.
pub fn load_split_with(path: impl AsRef<Path>, name: SplitName, strict: bool) -> Result<LoadReport, CorpusError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    parse_split(&bytes, name, strict)
}

/// Draws `n` questions without replacement; the output order is the draw order.
pub fn sample(split: &DatasetSplit, n: usize, seed: u64) -> Result<DatasetSplit, CorpusError> {
    if n > split.len() {
        return Err(CorpusError::SampleTooLarge { requested: n, available: split.len() });
    }
    let mut order: Vec<usize> = (0..split.len()).collect();
    rng::shuffle(&mut order, seed, "corpus.sample");
    let questions: Vec<MCQuestion> = order[..n].iter().map(|&i| split.questions[i].clone()).collect();
    let mut hasher = Sha256::new();
    hasher.update(split.source_fingerprint.as_bytes());
    hasher.update(format!(":sample:{n}:{seed}").as_bytes());
    Ok(DatasetSplit { name: split.name, questions, source_fingerprint: hex::encode(hasher.finalize()) })
}

pub fn fingerprint_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn fingerprint_questions(questions: &[MCQuestion]) -> String {
    let mut hasher = Sha256::new();
    for q in questions {
        hasher.update(serde_json::to_vec(q).expect("question serializes"));
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

/// Serializes a question back to the line format `parse_record` accepts.
pub fn to_record_line(q: &MCQuestion) -> String {
    serde_json::json!({
        "id": q.id,
        "question": q.stem,
        "choices": q.choices.iter().map(|c| serde_json::json!({"label": c.label.to_string(), "text": c.text})).collect::<Vec<_>>(),
        "answerKey": q.answer_label.to_string(),
    })
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(id: &str, n_choices: usize, answer: char) -> MCQuestion {
        MCQuestion {
            id: id.into(),
            stem: format!("stem {id}"),
            choices: LABELS[..n_choices].iter().map(|&l| Choice { label: l, text: format!("t{l}") }).collect(),
            answer_label: answer,
        }
    }

    #[test]
    fn empty_file_gives_empty_split() {
        let report = parse_split(b"", SplitName::Train, false).unwrap();
        assert!(report.split.is_empty());
        assert!(report.rejected.is_empty());
    }

    #[test]
    fn four_choice_record_is_rejected_with_line_number() {
        let lines = [q("a", 5, 'A'), q("b", 4, 'B'), q("c", 5, 'E')]
            .iter()
            .map(to_record_line)
            .collect::<Vec<_>>()
            .join("\n");
        let report = parse_split(lines.as_bytes(), SplitName::Train, false).unwrap();
        assert_eq!(report.split.len(), 2);
        assert_eq!(report.rejected.len(), 1);
        assert_eq!(report.rejected[0].line, 2);
        assert!(report.rejected[0].reason.contains("5 choices"));
        let json: serde_json::Value = serde_json::from_str(&report.error_report_json()).unwrap();
        assert_eq!(json[0]["line"], 2);

        let strict = parse_split(lines.as_bytes(), SplitName::Train, true);
        assert!(matches!(strict, Err(CorpusError::Malformed(LineError { line: 2, .. }))));
    }

    #[test]
    fn duplicate_id_rejects_file() {
        let lines = format!("{}\n{}", to_record_line(&q("a", 5, 'A')), to_record_line(&q("a", 5, 'B')));
        assert!(matches!(
            parse_split(lines.as_bytes(), SplitName::Test, false),
            Err(CorpusError::DuplicateId { line: 2, .. })
        ));
    }

    #[test]
    fn nested_public_release_shape_is_accepted() {
        let line = r#"{"id":"x","question":{"stem":"Where?","choices":[{"label":"A","text":"a"},{"label":"B","text":"b"},{"label":"C","text":"c"},{"label":"D","text":"d"},{"label":"E","text":"e"}]},"answerKey":"C"}"#;
        let q = parse_record(line).unwrap();
        assert_eq!(q.stem, "Where?");
        assert_eq!(q.answer_text(), "c");
    }

    #[test]
    fn invalid_answer_and_labels() {
        let mut bad = q("z", 5, 'A');
        bad.answer_label = 'F';
        assert_eq!(bad.validate(), Err(QuestionInvalid::AnswerNotAChoice('F')));
        let mut rep = q("z", 5, 'A');
        rep.choices[1].label = 'A';
        assert_eq!(rep.validate(), Err(QuestionInvalid::RepeatedLabel('A')));
        let mut blank = q("z", 5, 'A');
        blank.choices[2].text = "  ".into();
        assert_eq!(blank.validate(), Err(QuestionInvalid::EmptyChoiceText('C')));
    }

    #[test]
    fn sample_contracts() {
        let split = DatasetSplit::new(SplitName::Test, (0..10).map(|i| q(&format!("q{i}"), 5, 'A')).collect());
        let all = sample(&split, 10, 7).unwrap();
        let mut ids: Vec<_> = all.questions.iter().map(|q| q.id.clone()).collect();
        ids.sort();
        let mut expected: Vec<_> = split.questions.iter().map(|q| q.id.clone()).collect();
        expected.sort();
        assert_eq!(ids, expected);
        assert!(sample(&split, 0, 7).unwrap().is_empty());
        assert!(matches!(sample(&split, 11, 7), Err(CorpusError::SampleTooLarge { .. })));
    }

    #[test]
    fn render_lists_choices_one_per_line() {
        let r = q("r", 5, 'A').render();
        assert_eq!(r.lines().count(), 6);
        assert!(r.lines().nth(1).unwrap().starts_with("(A) "));
    }
}
