//! Item pool construction and the session state machine, persisted as an
//! append-only event journal.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use distill_core::manifest::sha256_hex;
use distill_core::rng;
use distill_core::stats::RatingObservation;
use distill_core::ModelVariant;

use crate::model::{
    AttentionCheck, BlindItem, Candidate, Demographics, RatingSubmission, SessionStatus, SurveyItem, SurveySession,
    ATTENTION_ITEM_ID, ITEMS_PER_SESSION, ITEMS_PER_VARIANT,
};

#[derive(Debug, thiserror::Error)]
pub enum SurveyError {
    #[error("invalid item pool: {0}")]
    Pool(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("item `{item}` is not part of session `{session}`")]
    UnknownItem { session: String, item: String },
    #[error("item `{0}` was already rated")]
    DuplicateRating(String),
    #[error("{0} must be between 1 and 5")]
    OutOfRange(String),
    #[error("participant `{0}` already has a session")]
    DuplicateParticipant(String),
    #[error("session `{0}` is closed")]
    Closed(String),
    #[error("demographics were already submitted")]
    DuplicateDemographics,
    #[error("invalid submission: {0}")]
    Invalid(String),
    #[error("journal {path}: {message}")]
    Journal { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemPool {
    pub items: Vec<SurveyItem>,
}

fn item_id(variant: ModelVariant, question_id: &str) -> String {
    // Opaque so that ids do not reveal the variant to participants.
    sha256_hex(format!("{variant}\u{0}{question_id}").as_bytes())[..12].to_string()
}

/// Turns candidate explanations into survey items. Exactly four variants are
/// required, each with at least three items; each (variant, question) pair
/// may appear once.
pub fn build_item_pool(candidates: &[Candidate]) -> Result<ItemPool, SurveyError> {
    let mut items: Vec<SurveyItem> = Vec::with_capacity(candidates.len());
    let mut seen = std::collections::BTreeSet::new();
    for c in candidates {
        if c.explanation.trim().is_empty() {
            return Err(SurveyError::Pool(format!("empty explanation for {} / {}", c.variant, c.question.id)));
        }
        if !seen.insert((c.variant, c.question.id.clone())) {
            return Err(SurveyError::Pool(format!("duplicate candidate for {} / {}", c.variant, c.question.id)));
        }
        items.push(SurveyItem {
            item_id: item_id(c.variant, &c.question.id),
            variant: c.variant,
            question: c.question.clone(),
            predicted_answer: c.predicted_answer.clone(),
            explanation: c.explanation.trim().to_string(),
        });
    }
    let pool = ItemPool { items };
    let counts = pool.counts();
    if counts.len() != ITEMS_PER_SESSION / ITEMS_PER_VARIANT {
        return Err(SurveyError::Pool(format!("expected 4 variants, found {}", counts.len())));
    }
    if let Some((v, n)) = counts.iter().find(|(_, &n)| n < ITEMS_PER_VARIANT) {
        return Err(SurveyError::Pool(format!("variant {v} has {n} items, needs {ITEMS_PER_VARIANT}")));
    }
    Ok(pool)
}

impl ItemPool {
    pub fn counts(&self) -> BTreeMap<ModelVariant, usize> {
        let mut m = BTreeMap::new();
        for i in &self.items {
            *m.entry(i.variant).or_insert(0) += 1;
        }
        m
    }

    pub fn get(&self, item_id: &str) -> Option<&SurveyItem> {
        self.items.iter().find(|i| i.item_id == item_id)
    }

    pub fn fingerprint(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("pool serializes"))
    }

    pub fn load(path: &Path) -> Result<Self, SurveyError> {
        let err = |message: String| SurveyError::Pool(format!("{}: {message}", path.display()));
        let bytes = std::fs::read(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_slice(&bytes).map_err(|e| err(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self).expect("pool serializes"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Opened { pool_fingerprint: String, seed: u64 },
    SessionCreated { session: SurveySession },
    RatingSubmitted { session_id: String, rating: RatingSubmission },
    DemographicsSubmitted { session_id: String, demographics: Demographics },
}

struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    fn append(&mut self, event: &Event) -> Result<(), SurveyError> {
        let mut line = serde_json::to_vec(event).expect("event serializes");
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|_| self.file.sync_data())
            .map_err(|e| SurveyError::Journal { path: self.path.display().to_string(), message: e.to_string() })
    }
}

/// Sessions over a fixed pool. With a journal attached, every accepted
/// change is appended before it is applied, and reopening replays it.
pub struct SurveyService {
    pool: ItemPool,
    seed: u64,
    attention: AttentionCheck,
    sessions: BTreeMap<String, SurveySession>,
    created: Vec<String>,
    journal: Option<Journal>,
    show_choices: bool,
}

impl SurveyService {
    pub fn in_memory(pool: ItemPool, seed: u64) -> Self {
        SurveyService {
            pool,
            seed,
            attention: AttentionCheck { item_id: ATTENTION_ITEM_ID.into(), expected: 1 },
            sessions: BTreeMap::new(),
            created: Vec::new(),
            journal: None,
            show_choices: true,
        }
    }

    /// Whether blind items list every answer choice or only the model's
    /// answer. Presentation only; not journaled.
    pub fn with_show_choices(mut self, show: bool) -> Self {
        self.show_choices = show;
        self
    }

    /// Opens (or creates) the journal at `path` and replays it. A journal
    /// written for a different pool or seed is refused.
    pub fn open(pool: ItemPool, seed: u64, path: impl Into<PathBuf>) -> Result<Self, SurveyError> {
        let path = path.into();
        let jerr = |message: String| SurveyError::Journal { path: path.display().to_string(), message };
        let mut service = Self::in_memory(pool, seed);
        let opened = Event::Opened { pool_fingerprint: service.pool.fingerprint(), seed };
        let mut fresh = true;
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(|e| jerr(e.to_string()))?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| jerr(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let event: Event = serde_json::from_str(&line).map_err(|e| jerr(format!("line {}: {e}", i + 1)))?;
                if fresh {
                    if event != opened {
                        return Err(jerr("journal belongs to a different item pool or seed".into()));
                    }
                    fresh = false;
                    continue;
                }
                service.apply(event);
            }
        }
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| jerr(e.to_string()))?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| jerr(e.to_string()))?;
        service.journal = Some(Journal { path: path.clone(), file });
        if fresh {
            service.record(opened)?;
        }
        Ok(service)
    }

    fn record(&mut self, event: Event) -> Result<(), SurveyError> {
        if let Some(j) = &mut self.journal {
            j.append(&event)?;
        }
        self.apply(event);
        Ok(())
    }

    fn apply(&mut self, event: Event) {
        match event {
            Event::Opened { .. } => {}
            Event::SessionCreated { session } => {
                self.created.push(session.session_id.clone());
                self.sessions.insert(session.session_id.clone(), session);
            }
            Event::RatingSubmitted { session_id, rating } => {
                let expected = self.attention.expected;
                let attention_id = self.attention.item_id.clone();
                if let Some(s) = self.sessions.get_mut(&session_id) {
                    let failed_check = rating.item_id == attention_id && rating.values().iter().any(|&v| v != expected);
                    s.ratings.push(rating);
                    if failed_check {
                        s.status = SessionStatus::Excluded;
                    } else if s.status == SessionStatus::InProgress && s.next_item().is_none() {
                        s.status = SessionStatus::Completed;
                    }
                }
            }
            Event::DemographicsSubmitted { session_id, demographics } => {
                if let Some(s) = self.sessions.get_mut(&session_id) {
                    s.demographics = Some(demographics);
                }
            }
        }
    }

    pub fn pool(&self) -> &ItemPool {
        &self.pool
    }

    pub fn session(&self, session_id: &str) -> Option<&SurveySession> {
        self.sessions.get(session_id)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &SurveySession> {
        self.created.iter().map(|id| &self.sessions[id])
    }

    /// Three items per variant drawn and ordered by `(seed, participant)`,
    /// with the attention check at a seeded position strictly inside the
    /// sequence.
    pub fn create_session(&mut self, participant_id: &str) -> Result<SurveySession, SurveyError> {
        let participant_id = participant_id.trim();
        if participant_id.is_empty() {
            return Err(SurveyError::Invalid("participant_id must be non-empty".into()));
        }
        if self.sessions.values().any(|s| s.participant_id == participant_id) {
            return Err(SurveyError::DuplicateParticipant(participant_id.to_string()));
        }
        let mut r = rng::stream(self.seed, &format!("survey.session:{participant_id}"));
        let mut items = Vec::with_capacity(ITEMS_PER_SESSION);
        for variant in self.pool.counts().keys() {
            let ids: Vec<&str> =
                self.pool.items.iter().filter(|i| i.variant == *variant).map(|i| i.item_id.as_str()).collect();
            items.extend(ids.choose_multiple(&mut r, ITEMS_PER_VARIANT).map(|s| s.to_string()));
        }
        items.shuffle(&mut r);
        let attention_position = r.random_range(1..ITEMS_PER_SESSION);
        let session = SurveySession {
            session_id: format!("{:032x}", rand::random::<u128>()),
            participant_id: participant_id.to_string(),
            items,
            attention_position,
            status: SessionStatus::InProgress,
            ratings: Vec::new(),
            demographics: None,
        };
        self.record(Event::SessionCreated { session: session.clone() })?;
        Ok(session)
    }

    fn open_session(&self, session_id: &str) -> Result<&SurveySession, SurveyError> {
        let s = self.sessions.get(session_id).ok_or_else(|| SurveyError::UnknownSession(session_id.to_string()))?;
        if s.status == SessionStatus::Excluded {
            return Err(SurveyError::Closed(session_id.to_string()));
        }
        Ok(s)
    }

    /// Next unrated item, blinded; `None` once everything is rated.
    pub fn next_item(&self, session_id: &str) -> Result<Option<(usize, BlindItem)>, SurveyError> {
        let s = self.open_session(session_id)?;
        let Some(id) = s.next_item() else { return Ok(None) };
        let position = s.ratings.len();
        if id == self.attention.item_id {
            return Ok(Some((position, self.attention.blind())));
        }
        let item = self.pool.get(id).expect("session items come from the pool");
        Ok(Some((
            position,
            BlindItem {
                item_id: item.item_id.clone(),
                question: item.question.stem.clone(),
                choices: if self.show_choices {
                    item.question.choices.iter().map(|c| format!("{}) {}", c.label, c.text)).collect()
                } else {
                    Vec::new()
                },
                answer: item.predicted_answer.clone(),
                explanation: item.explanation.clone(),
            },
        )))
    }

    pub fn submit_rating(&mut self, session_id: &str, rating: RatingSubmission) -> Result<SessionStatus, SurveyError> {
        let s = self.open_session(session_id)?;
        if s.status != SessionStatus::InProgress {
            return Err(SurveyError::Closed(session_id.to_string()));
        }
        if !s.sequence().contains(&rating.item_id.as_str()) {
            return Err(SurveyError::UnknownItem { session: session_id.to_string(), item: rating.item_id });
        }
        if s.rated(&rating.item_id) {
            return Err(SurveyError::DuplicateRating(rating.item_id));
        }
        let names = ["plausibility", "understandability", "completeness", "satisfaction", "contrastiveness"];
        if let Some((name, _)) = names.iter().zip(rating.values()).find(|(_, v)| !(1..=5).contains(v)) {
            return Err(SurveyError::OutOfRange(name.to_string()));
        }
        self.record(Event::RatingSubmitted { session_id: session_id.to_string(), rating })?;
        Ok(self.sessions[session_id].status)
    }

    pub fn submit_demographics(&mut self, session_id: &str, demographics: Demographics) -> Result<(), SurveyError> {
        let s = self.open_session(session_id)?;
        if s.demographics.is_some() {
            return Err(SurveyError::DuplicateDemographics);
        }
        let d = &demographics;
        for (name, value) in [
            ("gender", &d.gender),
            ("age_band", &d.age_band),
            ("country", &d.country),
            ("education", &d.education),
            ("employment", &d.employment),
        ] {
            if value.trim().is_empty() {
                return Err(SurveyError::Invalid(format!("{name} must be non-empty")));
            }
        }
        self.record(Event::DemographicsSubmitted { session_id: session_id.to_string(), demographics })
    }

    /// One row per rated pool item of every completed session, in session
    /// creation order then presentation order. Missing demographics export
    /// as empty strings.
    pub fn export_ratings(&self) -> Vec<RatingObservation> {
        let mut rows = Vec::new();
        for s in self.sessions().filter(|s| s.status == SessionStatus::Completed) {
            let blank = Demographics {
                gender: String::new(),
                age_band: String::new(),
                country: String::new(),
                education: String::new(),
                employment: String::new(),
            };
            let d = s.demographics.as_ref().unwrap_or(&blank);
            for id in &s.items {
                let item = self.pool.get(id).expect("session items come from the pool");
                let r = s.ratings.iter().find(|r| &r.item_id == id).expect("completed sessions rated every item");
                rows.push(RatingObservation {
                    participant_id: s.participant_id.clone(),
                    variant: item.variant,
                    item_id: item.item_id.clone(),
                    plausibility: r.plausibility,
                    understandability: r.understandability,
                    completeness: r.completeness,
                    satisfaction: r.satisfaction,
                    contrastiveness: r.contrastiveness,
                    explanation_length: item.explanation_length(),
                    gender: d.gender.clone(),
                    age_band: d.age_band.clone(),
                    country: d.country.clone(),
                    education: d.education.clone(),
                    employment: d.employment.clone(),
                });
            }
        }
        rows
    }

    pub fn export_csv(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        distill_core::stats::write_ratings_csv(&mut buf, &self.export_ratings()).expect("writing to memory succeeds");
        buf
    }
}
