//! End-to-end analyses behind `analyze performance` and `analyze ratings`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::linear::{quality_regression, Baselines, RegressionRow, TwoWayObservation};
use super::nonparametric::{vda_pairwise, EffectSize};
use super::ratings::{groups_by_variant, Dimension, RatingObservation};
use super::render::{render_pairwise_table, render_regression_table};
use super::{anova_two_way, anova_type_test, dunn_test, kruskal_wallis, levene, normality_and_variance_checks, stars, tukey_kramer, Group, StatsError, TestReport};
use crate::evaluation::{iqr_filter, AccuracyResult};
use crate::ModelVariant;

const ALPHA: f64 = 0.05;

fn variant_rank(v: &ModelVariant) -> (usize, ModelVariant) {
    (ModelVariant::CANONICAL.iter().position(|c| c == v).unwrap_or(usize::MAX), *v)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerformanceAnalysis {
    pub excluded: Vec<AccuracyResult>,
    pub normality: Option<TestReport>,
    pub variance: Option<TestReport>,
    pub anova: TestReport,
    /// Tukey-Kramer across variants within each size.
    pub tukey: Vec<(String, TestReport)>,
    pub notes: Vec<String>,
}

/// Box-plot filtering per (variant, size) cell, assumption checks, two-way
/// ANOVA on accuracy and Tukey-Kramer comparisons within each size.
pub fn analyze_performance(results: &[AccuracyResult]) -> Result<PerformanceAnalysis, StatsError> {
    let mut cells: BTreeMap<(String, (usize, ModelVariant)), Vec<AccuracyResult>> = BTreeMap::new();
    for r in results {
        cells.entry((r.size.clone(), variant_rank(&r.variant))).or_default().push(r.clone());
    }
    let mut notes = Vec::new();
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for ((size, (_, variant)), rows) in &cells {
        let acc: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
        match iqr_filter(&acc) {
            Ok(split) => {
                for r in rows {
                    if split.excluded.contains(&r.accuracy) {
                        excluded.push(r.clone());
                    } else {
                        kept.push(r.clone());
                    }
                }
            }
            Err(_) => {
                notes.push(format!("{variant} / {size}: {} runs, outlier filter skipped", rows.len()));
                kept.extend(rows.iter().cloned());
            }
        }
    }
    let cell_groups: Vec<Group> = cells
        .keys()
        .map(|(size, (_, v))| {
            let values = kept.iter().filter(|r| &r.size == size && &r.variant == v).map(|r| r.accuracy).collect();
            Group::new(format!("{v} / {size}"), values)
        })
        .collect();
    let (normality, variance) = match normality_and_variance_checks(&cell_groups) {
        Ok((n, v)) => (Some(n), Some(v)),
        Err(e) => {
            notes.push(format!("assumption checks skipped: {e}"));
            (None, None)
        }
    };
    let data: Vec<TwoWayObservation> = kept
        .iter()
        .map(|r| TwoWayObservation { a: r.variant.to_string(), b: r.size.clone(), value: r.accuracy })
        .collect();
    let anova = anova_two_way(&data, "variant", "size")?;
    let sizes: std::collections::BTreeSet<String> = kept.iter().map(|r| r.size.clone()).collect();
    let mut tukey = Vec::new();
    for size in sizes {
        let groups: Vec<Group> = cells
            .keys()
            .filter(|(s, _)| *s == size)
            .map(|(_, (_, v))| {
                Group::new(v.to_string(), kept.iter().filter(|r| r.size == size && &r.variant == v).map(|r| r.accuracy).collect())
            })
            .filter(|g| !g.values.is_empty())
            .collect();
        match tukey_kramer(&groups) {
            Ok(r) => tukey.push((size, r)),
            Err(e) => notes.push(format!("Tukey-Kramer skipped for {size}: {e}")),
        }
    }
    Ok(PerformanceAnalysis { excluded, normality, variance, anova, tukey, notes })
}

fn fmt_p(p: f64) -> String {
    if p < 0.001 { "< 0.001".into() } else { format!("{p:.3}") }
}

impl PerformanceAnalysis {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Excluded outlier runs: {}", self.excluded.len());
        for r in &self.excluded {
            let _ = writeln!(out, "  {} / {} seed {}: {:.4}", r.variant, r.size, r.seed, r.accuracy);
        }
        if let Some(n) = &self.normality {
            let _ = writeln!(out, "\nShapiro-Wilk per cell");
            for row in &n.rows {
                let _ = writeln!(out, "  {}: W = {:.4}, p = {}", row.term, row.statistic, fmt_p(row.p_value));
            }
        }
        if let Some(v) = &self.variance {
            let _ = writeln!(out, "Levene: F = {:.4}, p = {}", v.statistic, fmt_p(v.p_value));
        }
        let _ = writeln!(out, "\nTwo-way ANOVA on accuracy (type II)");
        for row in &self.anova.rows {
            if row.term == "Residual" {
                let _ = writeln!(out, "  Residual: df = {}, SS = {:.6}", row.df.unwrap_or(0.0), row.sum_sq.unwrap_or(0.0));
            } else {
                let _ = writeln!(
                    out,
                    "  {}: df = {}, F = {:.4}, p = {}{}",
                    row.term,
                    row.df.unwrap_or(0.0),
                    row.statistic,
                    fmt_p(row.p_value),
                    stars(row.p_value)
                );
            }
        }
        let _ = writeln!(out, "\nTukey-Kramer (estimate = Model 2 - Model 1)");
        for (size, r) in &self.tukey {
            out.push_str(&render_pairwise_table(r, Some(size)));
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimensionAnalysis {
    pub dimension: Dimension,
    pub kruskal: TestReport,
    pub dunn: Option<TestReport>,
    pub effect_sizes: Vec<EffectSize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatingsAnalysis {
    pub n_observations: usize,
    pub dimensions: Vec<DimensionAnalysis>,
    pub ats: TestReport,
    pub outliers_removed: usize,
    pub variance: TestReport,
    pub regression: TestReport,
    pub regression_controls: Option<TestReport>,
    pub notes: Vec<String>,
}

/// Kruskal-Wallis per dimension (Dunn when significant), Vargha-Delaney
/// effect sizes, the ANOVA-type statistic on quality, then box-plot outlier
/// removal on quality before the regressions with and without demographics.
pub fn analyze_ratings(observations: &[RatingObservation], baselines: &Baselines) -> Result<RatingsAnalysis, StatsError> {
    let mut notes = Vec::new();
    let mut dimensions = Vec::new();
    for dim in Dimension::RATED.into_iter().chain([Dimension::Quality]) {
        let groups = groups_by_variant(observations, dim);
        let kruskal = kruskal_wallis(&groups)?;
        let dunn = if kruskal.p_value < ALPHA { Some(dunn_test(&groups)?) } else { None };
        dimensions.push(DimensionAnalysis { dimension: dim, kruskal, dunn, effect_sizes: vda_pairwise(&groups) });
    }
    let ats = anova_type_test(&groups_by_variant(observations, Dimension::Quality))?;

    let quality: Vec<f64> = observations.iter().map(|o| o.quality()).collect();
    let split = iqr_filter(&quality).map_err(|e| StatsError::Invalid(e.to_string()))?;
    let kept: Vec<RatingObservation> = observations
        .iter()
        .filter(|o| {
            let q = o.quality();
            q >= split.lower && q <= split.upper
        })
        .cloned()
        .collect();
    let outliers_removed = observations.len() - kept.len();
    let variance = levene(&groups_by_variant(&kept, Dimension::Quality))?;
    let rows: Vec<RegressionRow> = kept.iter().map(RegressionRow::from).collect();
    let regression = quality_regression(&rows, baselines, false)?;
    let regression_controls = match quality_regression(&rows, baselines, true) {
        Ok(r) => Some(r),
        Err(e) => {
            notes.push(format!("regression with demographic controls skipped: {e}"));
            None
        }
    };
    Ok(RatingsAnalysis {
        n_observations: observations.len(),
        dimensions,
        ats,
        outliers_removed,
        variance,
        regression,
        regression_controls,
        notes,
    })
}

impl RatingsAnalysis {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Observations: {}", self.n_observations);
        for d in &self.dimensions {
            let _ = writeln!(
                out,
                "\n{}: Kruskal-Wallis H = {:.4}, p = {}{}",
                d.dimension.name(),
                d.kruskal.statistic,
                fmt_p(d.kruskal.p_value),
                stars(d.kruskal.p_value)
            );
            if let Some(dunn) = &d.dunn {
                let _ = writeln!(out, "Dunn (Holm), estimate = mean rank difference");
                out.push_str(&render_pairwise_table(dunn, None));
            }
            for e in &d.effect_sizes {
                let _ = writeln!(out, "  A({} vs {}) = {:.3} ({})", e.group2, e.group1, e.a, super::nonparametric::vda_magnitude(e.a));
            }
        }
        let _ = writeln!(
            out,
            "\nANOVA-type statistic on quality: F({:.2}, {:.2}) = {:.4}, p = {}",
            self.ats.df[0],
            self.ats.df[1],
            self.ats.statistic,
            fmt_p(self.ats.p_value)
        );
        let _ = writeln!(out, "Quality outliers removed: {}", self.outliers_removed);
        let _ = writeln!(out, "Levene on quality: F = {:.4}, p = {}", self.variance.statistic, fmt_p(self.variance.p_value));
        let _ = writeln!(out, "\nRegression on quality");
        out.push_str(&render_regression_table(&self.regression));
        if let Some(r) = &self.regression_controls {
            let _ = writeln!(out, "\nRegression on quality with demographic controls");
            out.push_str(&render_regression_table(r));
        }
        for n in self.regression.notes.iter().chain(&self.notes) {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}
