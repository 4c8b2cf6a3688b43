use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrainingMethod {
    #[serde(rename = "MT")]
    Multitask,
    #[serde(rename = "CF")]
    Counterfactual,
    #[serde(rename = "MT+CF")]
    Combined,
}

impl TrainingMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Multitask => "MT",
            Self::Counterfactual => "CF",
            Self::Combined => "MT+CF",
        }
    }
}

impl FromStr for TrainingMethod {
    type Err = VariantParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MT" => Ok(Self::Multitask),
            "CF" => Ok(Self::Counterfactual),
            "MT+CF" | "MTCF" | "CF+MT" => Ok(Self::Combined),
            _ => Err(VariantParseError(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplanationSource {
    Unrevised,
    Revised,
}

impl ExplanationSource {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Unrevised => "Unrevised",
            Self::Revised => "Revised",
        }
    }
}

impl FromStr for ExplanationSource {
    type Err = VariantParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "unrevised" => Ok(Self::Unrevised),
            "revised" => Ok(Self::Revised),
            _ => Err(VariantParseError(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognised model variant `{0}` (expected e.g. `MT+CF:Revised`)")]
pub struct VariantParseError(pub String);

/// A (training method, explanation source) configuration of a student.
///
/// Rendered as `METHOD:Source`, e.g. `MT+CF:Revised`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelVariant {
    pub method: TrainingMethod,
    pub source: ExplanationSource,
}

impl ModelVariant {
    pub const CF_UNREVISED: Self = Self::new(TrainingMethod::Counterfactual, ExplanationSource::Unrevised);
    pub const MT_UNREVISED: Self = Self::new(TrainingMethod::Multitask, ExplanationSource::Unrevised);
    pub const MTCF_UNREVISED: Self = Self::new(TrainingMethod::Combined, ExplanationSource::Unrevised);
    pub const MTCF_REVISED: Self = Self::new(TrainingMethod::Combined, ExplanationSource::Revised);

    /// The four studied variants, baseline first.
    pub const CANONICAL: [Self; 4] = [
        Self::CF_UNREVISED,
        Self::MT_UNREVISED,
        Self::MTCF_UNREVISED,
        Self::MTCF_REVISED,
    ];

    pub const fn new(method: TrainingMethod, source: ExplanationSource) -> Self {
        Self { method, source }
    }

    pub fn is_canonical(&self) -> bool {
        Self::CANONICAL.contains(self)
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.method.as_str(), self.source.as_str())
    }
}

impl FromStr for ModelVariant {
    type Err = VariantParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (method, source) = s.split_once(':').ok_or_else(|| VariantParseError(s.to_string()))?;
        Ok(Self {
            method: method.parse().map_err(|_| VariantParseError(s.to_string()))?,
            source: source.parse().map_err(|_| VariantParseError(s.to_string()))?,
        })
    }
}

impl Serialize for ModelVariant {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelVariant {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
