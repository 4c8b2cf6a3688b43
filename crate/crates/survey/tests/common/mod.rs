#![allow(dead_code)]

use distill_core::synthetic::keyword_questions;
use distill_core::ModelVariant;
use distill_survey::{build_item_pool, Candidate, Demographics, ItemPool, RatingSubmission};

/// Five questions explained by each canonical variant.
pub fn candidates() -> Vec<Candidate> {
    let questions = keyword_questions(5, 11);
    let mut out = Vec::new();
    for (vi, variant) in ModelVariant::CANONICAL.into_iter().enumerate() {
        for q in &questions {
            let answer = q.choice_text(q.answer_label).unwrap().to_string();
            out.push(Candidate {
                variant,
                question: q.clone(),
                predicted_answer: answer.clone(),
                explanation: format!("{} {}", "because".repeat(1), "word ".repeat(vi + 3)) + &answer,
            });
        }
    }
    out
}

pub fn pool() -> ItemPool {
    build_item_pool(&candidates()).unwrap()
}

pub fn rating(item_id: &str, v: u8) -> RatingSubmission {
    RatingSubmission {
        item_id: item_id.to_string(),
        plausibility: v,
        understandability: v,
        completeness: v,
        satisfaction: v,
        contrastiveness: v,
    }
}

/// Ratings for a cooperative participant: pool items get values derived from
/// `k`, the attention check gets the instructed value.
pub fn answer_value(item_id: &str, k: usize, position: usize) -> u8 {
    if item_id == "attention-check" {
        1
    } else {
        ((k + position) % 5 + 1) as u8
    }
}

pub fn demographics(k: usize) -> Demographics {
    Demographics {
        gender: if k % 2 == 0 { "female" } else { "male" }.into(),
        age_band: "25 to 34 years old".into(),
        country: ["United Kingdom", "Germany", "Côte d'Ivoire, \"CI\""][k % 3].into(),
        education: "Bachelor's degree".into(),
        employment: "Student".into(),
    }
}
