//! Survey items, sessions and submissions.

use serde::{Deserialize, Serialize};

use distill_core::corpus::MCQuestion;
use distill_core::ModelVariant;

/// Items per session, and per variant within a session.
pub const ITEMS_PER_SESSION: usize = 12;
pub const ITEMS_PER_VARIANT: usize = 3;

/// A student's explanation for one question, before it enters the pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub variant: ModelVariant,
    pub question: MCQuestion,
    /// The answer text the student gave.
    pub predicted_answer: String,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyItem {
    pub item_id: String,
    pub variant: ModelVariant,
    pub question: MCQuestion,
    pub predicted_answer: String,
    pub explanation: String,
}

impl SurveyItem {
    pub fn explanation_length(&self) -> usize {
        self.explanation.split_whitespace().count()
    }
}

/// What a participant sees: no variant, no ids beyond the item's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlindItem {
    pub item_id: String,
    pub question: String,
    pub choices: Vec<String>,
    pub answer: String,
    pub explanation: String,
}

/// Instructed-response item: passing means every dimension is rated `expected`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionCheck {
    pub item_id: String,
    pub expected: u8,
}

pub const ATTENTION_ITEM_ID: &str = "attention-check";

impl AttentionCheck {
    pub fn blind(&self) -> BlindItem {
        BlindItem {
            item_id: self.item_id.clone(),
            question: "This item checks that you are reading carefully.".into(),
            choices: Vec::new(),
            answer: String::new(),
            explanation: format!("Please rate every dimension of this item as {}.", self.expected),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    InProgress,
    Completed,
    /// Failed the attention check; never exported.
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingSubmission {
    pub item_id: String,
    pub plausibility: u8,
    pub understandability: u8,
    pub completeness: u8,
    pub satisfaction: u8,
    pub contrastiveness: u8,
}

impl RatingSubmission {
    pub fn values(&self) -> [u8; 5] {
        [self.plausibility, self.understandability, self.completeness, self.satisfaction, self.contrastiveness]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub gender: String,
    pub age_band: String,
    pub country: String,
    pub education: String,
    pub employment: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveySession {
    pub session_id: String,
    pub participant_id: String,
    /// Pool item ids in presentation order, attention check excluded.
    pub items: Vec<String>,
    /// Index in the presentation sequence where the attention check appears.
    pub attention_position: usize,
    pub status: SessionStatus,
    pub ratings: Vec<RatingSubmission>,
    pub demographics: Option<Demographics>,
}

impl SurveySession {
    /// Item ids in presentation order, attention check included.
    pub fn sequence(&self) -> Vec<&str> {
        let mut seq: Vec<&str> = self.items.iter().map(String::as_str).collect();
        seq.insert(self.attention_position, ATTENTION_ITEM_ID);
        seq
    }

    pub fn rated(&self, item_id: &str) -> bool {
        self.ratings.iter().any(|r| r.item_id == item_id)
    }

    /// Next unrated item in presentation order.
    pub fn next_item(&self) -> Option<&str> {
        self.sequence().into_iter().find(|id| !self.rated(id))
    }
}
