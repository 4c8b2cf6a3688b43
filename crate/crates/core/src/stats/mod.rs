//! Statistical comparison of student variants: assumption checks, parametric
//! and rank-based tests, post-hoc comparisons, effect sizes and the
//! rating-quality regression.

pub mod ats;
pub mod descriptive;
pub mod dist;
pub mod linear;
pub mod nonparametric;
pub mod parametric;
pub mod pipeline;
pub mod ratings;
pub mod render;

use serde::{Deserialize, Serialize};

pub use ats::anova_type_test;
pub use pipeline::{analyze_performance, analyze_ratings, PerformanceAnalysis, RatingsAnalysis};
pub use linear::{anova_two_way, quality_regression, Baselines, RegressionRow};
pub use nonparametric::{dunn_test, kruskal_wallis, vda};
pub use parametric::{levene, normality_and_variance_checks, shapiro_wilk, tukey_kramer};
pub use ratings::{read_ratings_csv, write_ratings_csv, Dimension, RatingObservation};
pub use render::{render_pairwise_table, render_regression_table};
pub use nonparametric::{vda_pairwise, EffectSize};
pub use ratings::groups_by_variant;
pub use linear::{ols, OlsFit, TwoWayObservation};

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("{test} requires {need}, got {got}")]
    TooFewObservations { test: &'static str, need: String, got: String },
    #[error("{0}")]
    ZeroVariance(String),
    #[error("rank-deficient design: {0}")]
    RankDeficient(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("ratings file line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One named group of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub name: String,
    pub values: Vec<f64>,
}

impl Group {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Group { name: name.into(), values }
    }
}

/// A row keyed by a term or group: ANOVA effects, regression coefficients,
/// per-group normality results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRow {
    pub term: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sum_sq: Option<f64>,
    pub statistic: f64,
    pub p_value: f64,
}

impl TermRow {
    pub fn test(term: impl Into<String>, statistic: f64, p_value: f64) -> Self {
        TermRow { term: term.into(), estimate: None, std_error: None, df: None, sum_sq: None, statistic, p_value }
    }
}

/// Pairwise comparison; `estimate` is oriented as group2 minus group1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseRow {
    pub group1: String,
    pub group2: String,
    pub estimate: f64,
    pub statistic: f64,
    pub p_value: f64,
    /// Multiplicity-adjusted p-value, when the procedure adjusts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_adjusted: Option<f64>,
}

impl PairwiseRow {
    pub fn reported_p(&self) -> f64 {
        self.p_adjusted.unwrap_or(self.p_value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: String,
    pub statistic: f64,
    pub p_value: f64,
    pub df: Vec<f64>,
    pub group_sizes: Vec<(String, usize)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<TermRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairwise: Vec<PairwiseRow>,
    /// Method notes and diagnostics.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl TestReport {
    pub fn new(test: impl Into<String>, statistic: f64, p_value: f64, df: Vec<f64>, groups: &[Group]) -> Self {
        TestReport {
            test: test.into(),
            statistic,
            p_value,
            df,
            group_sizes: groups.iter().map(|g| (g.name.clone(), g.values.len())).collect(),
            rows: Vec::new(),
            pairwise: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn row(&self, term: &str) -> Option<&TermRow> {
        self.rows.iter().find(|r| r.term == term)
    }

    pub fn pair(&self, group1: &str, group2: &str) -> Option<&PairwiseRow> {
        self.pairwise.iter().find(|r| r.group1 == group1 && r.group2 == group2)
    }
}

/// Significance stars: `***` < 0.001, `**` < 0.01, `*` < 0.05, `·` < 0.1.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else if p < 0.1 {
        "\u{b7}"
    } else {
        ""
    }
}

/// Holm step-down adjustment, returned in input order.
pub fn holm(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).expect("p-values are not NaN"));
    let mut out = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        let adj = ((m - rank) as f64 * p[i]).min(1.0);
        running = running.max(adj);
        out[i] = running;
    }
    out
}

pub(crate) fn require_groups(test: &'static str, groups: &[Group], min_groups: usize, min_size: usize) -> Result<(), StatsError> {
    if groups.len() < min_groups {
        return Err(StatsError::TooFewObservations {
            test,
            need: format!("at least {min_groups} groups"),
            got: groups.len().to_string(),
        });
    }
    for g in groups {
        if g.values.len() < min_size {
            return Err(StatsError::TooFewObservations {
                test,
                need: format!("at least {min_size} observations per group"),
                got: format!("{} in group {}", g.values.len(), g.name),
            });
        }
        if g.values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::Invalid(format!("non-finite value in group {}", g.name)));
        }
    }
    Ok(())
}

pub(crate) fn pairs(k: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..k).flat_map(move |i| (i + 1..k).map(move |j| (i, j)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_ladder() {
        assert_eq!(stars(0.0005), "***");
        assert_eq!(stars(0.001), "**");
        assert_eq!(stars(0.009), "**");
        assert_eq!(stars(0.04), "*");
        assert_eq!(stars(0.07), "\u{b7}");
        assert_eq!(stars(0.1), "");
    }

    #[test]
    fn holm_is_monotone_step_down() {
        let adj = holm(&[0.01, 0.04, 0.03, 0.005]);
        for (a, b) in adj.iter().zip([0.03, 0.06, 0.06, 0.02]) {
            assert!((a - b).abs() < 1e-12, "{adj:?}");
        }
    }
}
