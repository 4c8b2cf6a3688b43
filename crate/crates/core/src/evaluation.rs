//! Answer extraction, accuracy scoring, outlier filtering and the per-run
//! results table.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::MCQuestion;
use crate::stats::descriptive::{quantile_sorted, sorted};
use crate::{ModelVariant, Scalar};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("prediction set does not match the gold split: {0}")]
    Mismatch(String),
    #[error("IQR filter needs at least 4 values, got {0}")]
    TooFewValues(usize),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("results file line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which rule of the extraction cascade produced the label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchRule {
    Label,
    ExactText,
    NormalizedText,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub question_id: String,
    pub raw_text: String,
    pub extracted_label: Option<char>,
    pub match_rule: MatchRule,
}

const ANSWER_CUE: &str = "the answer is";

/// The part of the output that states the answer: whatever follows the last
/// "the answer is" (case-insensitive), else the whole text.
fn answer_span(raw: &str) -> &str {
    match raw.to_ascii_lowercase().rfind(ANSWER_CUE) {
        Some(i) => &raw[i + ANSWER_CUE.len()..],
        None => raw,
    }
}

fn normalize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c.to_ascii_lowercase() } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn contains_phrase(haystack: &str, phrase: &str) -> bool {
    !phrase.is_empty() && format!(" {haystack} ").contains(&format!(" {phrase} "))
}

fn unique(found: Vec<char>) -> Option<char> {
    match found.as_slice() {
        [one] => Some(*one),
        _ => None,
    }
}

fn leading_label(span: &str, labels: &[char]) -> Option<char> {
    let s = span.trim_start();
    let s = s.strip_prefix('(').unwrap_or(s);
    let mut chars = s.chars();
    let c = chars.next()?;
    if !c.is_ascii_uppercase() || !labels.contains(&c) {
        return None;
    }
    match chars.next() {
        None => Some(c),
        Some(')' | '.' | ':' | ',') => Some(c),
        Some(w) if w.is_whitespace() && chars.as_str().trim().is_empty() => Some(c),
        _ => None,
    }
}

/// Maps raw student output to a choice label. Tried in order, first decisive
/// rule wins, and a rule matching more than one choice yields no label:
/// 1. a leading standalone label (`B`, `(B)`, `B.`, `B:`);
/// 2. case-insensitive exact choice text;
/// 3. normalized text: equal to a choice, else containing exactly one choice
///    as a whole-word phrase (choices contained in another matched choice
///    are discounted).
pub fn extract_answer(raw: &str, q: &MCQuestion) -> Prediction {
    let span = answer_span(raw);
    let labels: Vec<char> = q.labels().collect();
    let (label, rule) = if let Some(l) = leading_label(span, &labels) {
        (Some(l), MatchRule::Label)
    } else {
        let trimmed = span.trim().trim_end_matches('.').trim().to_lowercase();
        let exact: Vec<char> = q.choices.iter().filter(|c| c.text.trim().to_lowercase() == trimmed).map(|c| c.label).collect();
        if !exact.is_empty() {
            (unique(exact), MatchRule::ExactText)
        } else {
            let norm = normalize(span);
            let normed: Vec<(char, String)> = q.choices.iter().map(|c| (c.label, normalize(&c.text))).collect();
            let equal: Vec<char> = normed.iter().filter(|(_, t)| !t.is_empty() && *t == norm).map(|(l, _)| *l).collect();
            if !equal.is_empty() {
                (unique(equal), MatchRule::NormalizedText)
            } else {
                let hits: Vec<&(char, String)> = normed.iter().filter(|(_, t)| contains_phrase(&norm, t)).collect();
                let maximal: Vec<char> = hits
                    .iter()
                    .filter(|(l, t)| !hits.iter().any(|(l2, t2)| l2 != l && t2.len() > t.len() && contains_phrase(t2, t)))
                    .map(|(l, _)| *l)
                    .collect();
                if maximal.is_empty() {
                    (None, MatchRule::None)
                } else {
                    (unique(maximal), MatchRule::NormalizedText)
                }
            }
        }
    };
    Prediction {
        question_id: q.id.clone(),
        raw_text: raw.to_string(),
        extracted_label: label,
        match_rule: if label.is_some() { rule } else { MatchRule::None },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyResult {
    pub variant: ModelVariant,
    pub size: String,
    pub seed: u64,
    pub n_total: usize,
    pub n_correct: usize,
    pub accuracy: f64,
}

/// Fraction of predictions whose label equals the gold label. Unextractable
/// predictions count as wrong. The prediction ids must equal the gold ids.
pub fn accuracy(
    predictions: &[Prediction],
    gold: &[MCQuestion],
    variant: ModelVariant,
    size: &str,
    seed: u64,
) -> Result<AccuracyResult, EvalError> {
    let gold_by_id: BTreeMap<&str, char> = gold.iter().map(|q| (q.id.as_str(), q.answer_label)).collect();
    let mut seen = BTreeMap::new();
    for p in predictions {
        if !gold_by_id.contains_key(p.question_id.as_str()) {
            return Err(EvalError::Mismatch(format!("prediction for unknown question `{}`", p.question_id)));
        }
        if seen.insert(p.question_id.as_str(), ()).is_some() {
            return Err(EvalError::Mismatch(format!("duplicate prediction for `{}`", p.question_id)));
        }
    }
    if seen.len() != gold_by_id.len() {
        return Err(EvalError::Mismatch(format!("{} predictions for {} gold questions", seen.len(), gold_by_id.len())));
    }
    let n_correct = predictions
        .iter()
        .filter(|p| p.extracted_label == Some(gold_by_id[p.question_id.as_str()]))
        .count();
    let n_total = predictions.len();
    Ok(AccuracyResult {
        variant,
        size: size.to_string(),
        seed,
        n_total,
        n_correct,
        accuracy: if n_total == 0 { 0.0 } else { n_correct as f64 / n_total as f64 },
    })
}

/// Outcome of the 1.5 x IQR rule.
#[derive(Debug, Clone, PartialEq)]
pub struct IqrSplit<T> {
    pub retained: Vec<T>,
    pub excluded: Vec<T>,
    pub q1: T,
    pub q3: T,
    pub lower: T,
    pub upper: T,
}

/// Single-pass box-plot filter: values outside `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]`
/// (type-7 quartiles) are excluded. Input order is kept in both parts.
pub fn iqr_filter<T: Scalar>(values: &[T]) -> Result<IqrSplit<T>, EvalError> {
    if values.len() < 4 {
        return Err(EvalError::TooFewValues(values.len()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let s = sorted(values);
    let q1 = quantile_sorted(&s, 0.25);
    let q3 = quantile_sorted(&s, 0.75);
    let k = T::of(1.5) * (q3 - q1);
    let (lower, upper) = (q1 - k, q3 + k);
    let (retained, excluded) = values.iter().partition(|&&v| v >= lower && v <= upper);
    Ok(IqrSplit { retained, excluded, q1, q3, lower, upper })
}

pub const RESULTS_COLUMNS: [&str; 6] = ["variant", "size", "seed", "n_total", "n_correct", "accuracy"];

#[derive(Serialize, Deserialize)]
struct ResultRow {
    variant: ModelVariant,
    size: String,
    seed: u64,
    n_total: usize,
    n_correct: usize,
    accuracy: f64,
}

pub fn write_results_csv<W: Write>(writer: W, results: &[AccuracyResult]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESULTS_COLUMNS).map_err(csv_io)?;
    for r in results {
        w.write_record([
            r.variant.to_string(),
            r.size.clone(),
            r.seed.to_string(),
            r.n_total.to_string(),
            r.n_correct.to_string(),
            r.accuracy.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(reader: R) -> Result<Vec<AccuracyResult>, EvalError> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers().map_err(|e| EvalError::Parse { line: 1, reason: e.to_string() })?.clone();
    if headers.iter().ne(RESULTS_COLUMNS.iter().copied()) {
        return Err(EvalError::Parse { line: 1, reason: format!("expected columns {}", RESULTS_COLUMNS.join(",")) });
    }
    r.deserialize::<ResultRow>()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| EvalError::Parse { line: i + 2, reason: e.to_string() })?;
            Ok(AccuracyResult {
                variant: row.variant,
                size: row.size,
                seed: row.seed,
                n_total: row.n_total,
                n_correct: row.n_correct,
                accuracy: row.accuracy,
            })
        })
        .collect()
}

fn csv_io(e: csv::Error) -> EvalError {
    EvalError::Io(std::io::Error::other(e))
}
