//! Survey rating observations and their CSV form.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Group, StatsError};
use crate::ModelVariant;

/// Column order of the ratings export.
pub const RATINGS_COLUMNS: [&str; 14] = [
    "participant_id",
    "variant",
    "item_id",
    "plausibility",
    "understandability",
    "completeness",
    "satisfaction",
    "contrastiveness",
    "explanation_length",
    "gender",
    "age_band",
    "country",
    "education",
    "employment",
];

/// One participant's 1-5 ratings of one explanation, with demographics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingObservation {
    pub participant_id: String,
    pub variant: ModelVariant,
    pub item_id: String,
    pub plausibility: u8,
    pub understandability: u8,
    pub completeness: u8,
    pub satisfaction: u8,
    pub contrastiveness: u8,
    /// Whitespace-delimited token count of the rated explanation.
    pub explanation_length: usize,
    pub gender: String,
    pub age_band: String,
    pub country: String,
    pub education: String,
    pub employment: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Plausibility,
    Understandability,
    Completeness,
    Satisfaction,
    Contrastiveness,
    Quality,
}

impl Dimension {
    pub const RATED: [Dimension; 5] = [
        Dimension::Plausibility,
        Dimension::Understandability,
        Dimension::Completeness,
        Dimension::Satisfaction,
        Dimension::Contrastiveness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Plausibility => "plausibility",
            Dimension::Understandability => "understandability",
            Dimension::Completeness => "completeness",
            Dimension::Satisfaction => "satisfaction",
            Dimension::Contrastiveness => "contrastiveness",
            Dimension::Quality => "quality",
        }
    }
}

impl RatingObservation {
    pub fn ratings(&self) -> [u8; 5] {
        [self.plausibility, self.understandability, self.completeness, self.satisfaction, self.contrastiveness]
    }

    /// Mean of the five rated dimensions.
    pub fn quality(&self) -> f64 {
        self.ratings().iter().map(|&r| r as f64).sum::<f64>() / 5.0
    }

    pub fn value(&self, dim: Dimension) -> f64 {
        match dim {
            Dimension::Plausibility => self.plausibility as f64,
            Dimension::Understandability => self.understandability as f64,
            Dimension::Completeness => self.completeness as f64,
            Dimension::Satisfaction => self.satisfaction as f64,
            Dimension::Contrastiveness => self.contrastiveness as f64,
            Dimension::Quality => self.quality(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (dim, r) in Dimension::RATED.iter().zip(self.ratings()) {
            if !(1..=5).contains(&r) {
                return Err(format!("{} rating {r} outside 1..=5", dim.name()));
            }
        }
        if self.participant_id.is_empty() || self.item_id.is_empty() {
            return Err("participant_id and item_id must be non-empty".into());
        }
        Ok(())
    }
}

/// Groups one dimension by variant: canonical variants first, in canonical
/// order, then any others in sorted order.
pub fn groups_by_variant(observations: &[RatingObservation], dim: Dimension) -> Vec<Group> {
    let mut by: BTreeMap<ModelVariant, Vec<f64>> = BTreeMap::new();
    for o in observations {
        by.entry(o.variant).or_default().push(o.value(dim));
    }
    let mut out = Vec::new();
    for v in ModelVariant::CANONICAL {
        if let Some(values) = by.remove(&v) {
            out.push(Group::new(v.to_string(), values));
        }
    }
    out.extend(by.into_iter().map(|(v, values)| Group::new(v.to_string(), values)));
    out
}

pub fn write_ratings_csv<W: Write>(writer: W, observations: &[RatingObservation]) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(writer);
    if observations.is_empty() {
        w.write_record(RATINGS_COLUMNS).map_err(csv_io)?;
    }
    for o in observations {
        w.serialize(o).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ratings_csv<R: Read>(reader: R) -> Result<Vec<RatingObservation>, StatsError> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers().map_err(|e| StatsError::Parse { line: 1, reason: e.to_string() })?.clone();
    if headers.iter().ne(RATINGS_COLUMNS.iter().copied()) {
        return Err(StatsError::Parse {
            line: 1,
            reason: format!("expected columns {}", RATINGS_COLUMNS.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.deserialize::<RatingObservation>().enumerate() {
        let line = i + 2;
        let obs = rec.map_err(|e| StatsError::Parse { line, reason: e.to_string() })?;
        obs.validate().map_err(|reason| StatsError::Parse { line, reason })?;
        out.push(obs);
    }
    Ok(out)
}

fn csv_io(e: csv::Error) -> StatsError {
    StatsError::Io(std::io::Error::other(e))
}
