//! Least squares: the rating-quality regression and the two-way ANOVA
//! (type II sums of squares by nested model comparison).

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dist::{f_sf, t_two_sided};
use super::ratings::RatingObservation;
use super::{StatsError, TermRow, TestReport};
use crate::ModelVariant;

/// Relative tolerance below which a column counts as a linear combination of
/// the columns before it.
const ALIAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Column { name: name.into(), values }
    }
}

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    pub std_error: Vec<f64>,
    pub rss: f64,
    pub df_resid: usize,
    pub n: usize,
    /// Columns dropped because they were aliased with earlier ones.
    pub dropped: Vec<String>,
}

impl OlsFit {
    pub fn rank(&self) -> usize {
        self.coef.len()
    }

    pub fn sigma2(&self) -> f64 {
        self.rss / self.df_resid as f64
    }

    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.coef[i], self.std_error[i]))
    }

    pub fn term_rows(&self) -> Vec<TermRow> {
        (0..self.rank())
            .map(|i| {
                let t = self.coef[i] / self.std_error[i];
                TermRow {
                    term: self.names[i].clone(),
                    estimate: Some(self.coef[i]),
                    std_error: Some(self.std_error[i]),
                    df: Some(self.df_resid as f64),
                    sum_sq: None,
                    statistic: t,
                    p_value: t_two_sided(t, self.df_resid as f64),
                }
            })
            .collect()
    }
}

/// Keeps columns, in order, whose component orthogonal to the kept ones is
/// non-negligible (modified Gram-Schmidt). Returns kept and dropped indices.
fn independent_columns(columns: &[Column]) -> (Vec<usize>, Vec<usize>) {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let (mut kept, mut dropped) = (Vec::new(), Vec::new());
    for (idx, col) in columns.iter().enumerate() {
        let norm0 = col.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut r = col.values.clone();
        for q in &basis {
            let dot: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum();
            r.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm0 == 0.0 || norm <= ALIAS_TOL * norm0 {
            dropped.push(idx);
        } else {
            r.iter_mut().for_each(|v| *v /= norm);
            basis.push(r);
            kept.push(idx);
        }
    }
    (kept, dropped)
}

/// Ordinary least squares with aliased columns dropped, in column order.
pub fn ols(y: &[f64], columns: &[Column]) -> Result<OlsFit, StatsError> {
    let n = y.len();
    if columns.iter().any(|c| c.values.len() != n) {
        return Err(StatsError::Invalid("design columns differ in length from the response".into()));
    }
    if y.iter().chain(columns.iter().flat_map(|c| c.values.iter())).any(|v| !v.is_finite()) {
        return Err(StatsError::Invalid("non-finite value in regression data".into()));
    }
    let (kept, dropped) = independent_columns(columns);
    let p = kept.len();
    if n <= p {
        return Err(StatsError::TooFewObservations { test: "OLS", need: format!("more than {p} rows"), got: n.to_string() });
    }
    let x = DMatrix::from_fn(n, p, |r, c| columns[kept[c]].values[r]);
    let yv = DVector::from_column_slice(y);
    let xtx = x.transpose() * &x;
    let chol = xtx
        .clone()
        .cholesky()
        .ok_or_else(|| StatsError::RankDeficient("normal equations are not positive definite".into()))?;
    let beta = chol.solve(&(x.transpose() * &yv));
    let resid = &yv - &x * &beta;
    let rss = resid.norm_squared();
    let df_resid = n - p;
    let inv = chol.inverse();
    let sigma2 = rss / df_resid as f64;
    Ok(OlsFit {
        names: kept.iter().map(|&i| columns[i].name.clone()).collect(),
        coef: beta.iter().copied().collect(),
        std_error: (0..p).map(|i| (sigma2 * inv[(i, i)]).sqrt()).collect(),
        rss,
        df_resid,
        n,
        dropped: dropped.iter().map(|&i| columns[i].name.clone()).collect(),
    })
}

/// Treatment-coded indicator columns for a factor, baseline level omitted.
fn dummies(prefix: &str, labels: &[String], baseline: &str) -> Vec<Column> {
    let levels: BTreeSet<&String> = labels.iter().collect();
    levels
        .into_iter()
        .filter(|l| l.as_str() != baseline)
        .map(|l| Column::new(format!("{prefix}{l}"), labels.iter().map(|x| (x == l) as u8 as f64).collect()))
        .collect()
}

/// One observation of a two-factor layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoWayObservation {
    pub a: String,
    pub b: String,
    pub value: f64,
}

/// Two-way ANOVA with interaction, type II sums of squares. Rows are named
/// `a_name`, `b_name`, `a_name:b_name` and `Residual`.
pub fn anova_two_way(data: &[TwoWayObservation], a_name: &str, b_name: &str) -> Result<TestReport, StatsError> {
    let a: Vec<String> = data.iter().map(|d| d.a.clone()).collect();
    let b: Vec<String> = data.iter().map(|d| d.b.clone()).collect();
    let a_levels: BTreeSet<&String> = a.iter().collect();
    let b_levels: BTreeSet<&String> = b.iter().collect();
    if a_levels.len() < 2 || b_levels.len() < 2 {
        return Err(StatsError::TooFewObservations {
            test: "two-way ANOVA",
            need: "at least two levels per factor".into(),
            got: format!("{} and {}", a_levels.len(), b_levels.len()),
        });
    }
    let y: Vec<f64> = data.iter().map(|d| d.value).collect();
    let intercept = Column::new("(Intercept)", vec![1.0; data.len()]);
    let da = dummies(&format!("{a_name}="), &a, a_levels.first().unwrap());
    let db = dummies(&format!("{b_name}="), &b, b_levels.first().unwrap());
    let mut dab = Vec::new();
    for ca in &da {
        for cb in &db {
            dab.push(Column::new(
                format!("{}:{}", ca.name, cb.name),
                ca.values.iter().zip(&cb.values).map(|(x, y)| x * y).collect(),
            ));
        }
    }
    let design = |parts: &[&[Column]]| -> Vec<Column> {
        std::iter::once(intercept.clone()).chain(parts.iter().flat_map(|p| p.iter().cloned())).collect()
    };
    let m_a = ols(&y, &design(&[&da]))?;
    let m_b = ols(&y, &design(&[&db]))?;
    let m_ab = ols(&y, &design(&[&da, &db]))?;
    let full = ols(&y, &design(&[&da, &db, &dab]))?;
    if full.df_resid == 0 || full.rss <= 0.0 {
        return Err(StatsError::ZeroVariance("two-way ANOVA: no residual variance".into()));
    }
    let mse = full.rss / full.df_resid as f64;
    let term = |name: String, ss: f64, df: usize| {
        let f = (ss / df as f64) / mse;
        TermRow {
            term: name,
            estimate: None,
            std_error: None,
            df: Some(df as f64),
            sum_sq: Some(ss),
            statistic: f,
            p_value: f_sf(f, df as f64, full.df_resid as f64),
        }
    };
    let mut rows = vec![
        term(a_name.to_string(), m_b.rss - m_ab.rss, m_ab.rank() - m_b.rank()),
        term(b_name.to_string(), m_a.rss - m_ab.rss, m_ab.rank() - m_a.rank()),
    ];
    let inter_df = full.rank() - m_ab.rank();
    if inter_df > 0 {
        rows.push(term(format!("{a_name}:{b_name}"), m_ab.rss - full.rss, inter_df));
    }
    rows.push(TermRow {
        term: "Residual".into(),
        estimate: None,
        std_error: None,
        df: Some(full.df_resid as f64),
        sum_sq: Some(full.rss),
        statistic: f64::NAN,
        p_value: f64::NAN,
    });
    let mut report = TestReport::new("two-way ANOVA (type II)", rows[0].statistic, rows[0].p_value, vec![rows[0].df.unwrap(), full.df_resid as f64], &[]);
    report.rows = rows;
    report.notes.push(format!("summary statistic is the {a_name} main effect"));
    if inter_df < dab.len() {
        report.notes.push(format!("{} interaction columns aliased (empty cells)", dab.len() - inter_df));
    }
    Ok(report)
}

/// Baseline categories of the regression dummies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub variant: ModelVariant,
    pub gender: String,
    pub age_band: String,
    pub country: String,
    pub education: String,
    pub employment: String,
}

impl Default for Baselines {
    fn default() -> Self {
        Baselines {
            variant: ModelVariant::CF_UNREVISED,
            gender: "male".into(),
            age_band: "15 to 19 years old".into(),
            country: "United Kingdom".into(),
            education: "A-levels/International Baccalaureate/Higher education entrance qualification".into(),
            employment: "Civil servant".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub variant: ModelVariant,
    pub quality: f64,
    pub explanation_length: f64,
    pub gender: String,
    pub age_band: String,
    pub country: String,
    pub education: String,
    pub employment: String,
}

impl From<&RatingObservation> for RegressionRow {
    fn from(o: &RatingObservation) -> Self {
        RegressionRow {
            variant: o.variant,
            quality: o.quality(),
            explanation_length: o.explanation_length as f64,
            gender: o.gender.clone(),
            age_band: o.age_band.clone(),
            country: o.country.clone(),
            education: o.education.clone(),
            employment: o.employment.clone(),
        }
    }
}

fn baseline_or_modal(labels: &[String], wanted: &str, factor: &str, notes: &mut Vec<String>) -> String {
    if labels.iter().any(|l| l == wanted) {
        return wanted.to_string();
    }
    let mut counts: BTreeMap<&String, usize> = BTreeMap::new();
    labels.iter().for_each(|l| *counts.entry(l).or_default() += 1);
    let modal = counts.iter().max_by_key(|(_, &c)| c).map(|(l, _)| (*l).clone()).unwrap_or_default();
    notes.push(format!("{factor} baseline `{wanted}` absent; using `{modal}`"));
    modal
}

/// OLS of quality on variant indicators (baseline omitted) and explanation
/// length, optionally with dummy-coded demographic controls. Coefficient rows
/// are `(Intercept)`, `variant=<V>`, `explanation_length`, then `<factor>=<level>`.
pub fn quality_regression(rows: &[RegressionRow], baselines: &Baselines, demographics: bool) -> Result<TestReport, StatsError> {
    let n = rows.len();
    let mut notes = Vec::new();
    let y: Vec<f64> = rows.iter().map(|r| r.quality).collect();
    let variants: Vec<String> = rows.iter().map(|r| r.variant.to_string()).collect();
    let variant_levels: BTreeSet<&String> = variants.iter().collect();
    if variant_levels.len() < 2 {
        return Err(StatsError::TooFewObservations { test: "quality regression", need: "at least two variants".into(), got: variant_levels.len().to_string() });
    }
    let base_variant = baseline_or_modal(&variants, &baselines.variant.to_string(), "variant", &mut notes);
    let mut columns = vec![Column::new("(Intercept)", vec![1.0; n])];
    let variant_cols = dummies("variant=", &variants, &base_variant);
    let variant_names: Vec<String> = variant_cols.iter().map(|c| c.name.clone()).collect();
    columns.extend(variant_cols);
    columns.push(Column::new("explanation_length", rows.iter().map(|r| r.explanation_length).collect()));
    if demographics {
        let factors: [(&str, fn(&RegressionRow) -> &String, &String); 5] = [
            ("gender", |r| &r.gender, &baselines.gender),
            ("age", |r| &r.age_band, &baselines.age_band),
            ("country", |r| &r.country, &baselines.country),
            ("education", |r| &r.education, &baselines.education),
            ("employment", |r| &r.employment, &baselines.employment),
        ];
        for (name, get, wanted) in factors {
            let labels: Vec<String> = rows.iter().map(|r| get(r).clone()).collect();
            let base = baseline_or_modal(&labels, wanted, name, &mut notes);
            columns.extend(dummies(&format!("{name}="), &labels, &base));
        }
    }
    let fit = ols(&y, &columns)?;
    for d in &fit.dropped {
        if variant_names.contains(d) {
            return Err(StatsError::RankDeficient(format!("variant indicator `{d}` is collinear with other regressors")));
        }
        let why = if d == "explanation_length" { "constant or collinear" } else { "collinear" };
        notes.push(format!("dropped `{d}` ({why})"));
    }
    let mut report = TestReport::new("OLS quality regression", f64::NAN, f64::NAN, vec![fit.df_resid as f64], &[]);
    let (f, p) = overall_f(&y, &fit);
    report.statistic = f;
    report.p_value = p;
    report.df = vec![(fit.rank() - 1) as f64, fit.df_resid as f64];
    report.group_sizes = variant_levels.iter().map(|l| ((*l).clone(), variants.iter().filter(|v| v == l).count())).collect();
    report.rows = fit.term_rows();
    report.notes = notes;
    report.notes.push(format!("baseline variant {base_variant}; n = {n}"));
    Ok(report)
}

fn overall_f(y: &[f64], fit: &OlsFit) -> (f64, f64) {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    let tss: f64 = y.iter().map(|v| (v - m).powi(2)).sum();
    let df1 = (fit.rank() - 1) as f64;
    if df1 == 0.0 || fit.rss <= 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let f = ((tss - fit.rss) / df1) / fit.sigma2();
    (f, f_sf(f, df1, fit.df_resid as f64))
}
