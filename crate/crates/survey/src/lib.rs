//! Blinded human-evaluation survey: item pool, sessions with an attention
//! check, and a CSV export in the format the ratings analysis reads.

pub mod http;
pub mod model;
pub mod service;

pub use http::{router, serve, AppState};
pub use model::{
    BlindItem, Candidate, Demographics, RatingSubmission, SessionStatus, SurveyItem, SurveySession, ITEMS_PER_SESSION,
};
pub use service::{build_item_pool, ItemPool, SurveyError, SurveyService};
