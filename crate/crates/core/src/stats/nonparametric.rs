//! Rank-based tests: Kruskal-Wallis, Dunn post-hoc, Vargha-Delaney A.

use serde::{Deserialize, Serialize};

use super::descriptive::{midranks, tie_sum};
use super::dist::{chi2_sf, normal_sf};
use super::{holm, pairs, require_groups, Group, PairwiseRow, StatsError, TestReport};
use crate::Scalar;

struct Pooled {
    ranks: Vec<Vec<f64>>,
    n: usize,
    tie_sum: f64,
}

fn pooled_ranks(groups: &[Group]) -> Pooled {
    let all: Vec<f64> = groups.iter().flat_map(|g| g.values.iter().copied()).collect();
    let (ranks, ties) = midranks(&all);
    let mut out = Vec::with_capacity(groups.len());
    let mut at = 0;
    for g in groups {
        out.push(ranks[at..at + g.values.len()].to_vec());
        at += g.values.len();
    }
    Pooled { ranks: out, n: all.len(), tie_sum: tie_sum(&ties) }
}

/// Kruskal-Wallis H with the tie correction, chi-square reference on k - 1 df.
pub fn kruskal_wallis(groups: &[Group]) -> Result<TestReport, StatsError> {
    require_groups("Kruskal-Wallis", groups, 2, 1)?;
    let pooled = pooled_ranks(groups);
    let n = pooled.n as f64;
    let df = (groups.len() - 1) as f64;
    let correction = 1.0 - pooled.tie_sum / (n.powi(3) - n);
    let mut report;
    if correction <= 0.0 {
        report = TestReport::new("Kruskal-Wallis", 0.0, 1.0, vec![df], groups);
        report.notes.push("all observations tied; H set to 0".into());
    } else {
        let s: f64 = pooled
            .ranks
            .iter()
            .map(|r| r.iter().sum::<f64>().powi(2) / r.len() as f64)
            .sum();
        let h = ((12.0 / (n * (n + 1.0)) * s - 3.0 * (n + 1.0)) / correction).max(0.0);
        report = TestReport::new("Kruskal-Wallis", h, chi2_sf(h, df), vec![df], groups);
    }
    report.notes.push("tie-corrected H".into());
    Ok(report)
}

/// Dunn's pairwise test on pooled mid-ranks with Holm adjustment. Each pair
/// carries the mean-rank difference `group2 - group1`, its z statistic, the
/// raw two-sided p-value and the Holm-adjusted one.
pub fn dunn_test(groups: &[Group]) -> Result<TestReport, StatsError> {
    require_groups("Dunn", groups, 2, 1)?;
    let pooled = pooled_ranks(groups);
    let n = pooled.n as f64;
    let base = n * (n + 1.0) / 12.0 - pooled.tie_sum / (12.0 * (n - 1.0));
    let mean_rank: Vec<f64> = pooled.ranks.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
    let mut rows = Vec::new();
    for (i, j) in pairs(groups.len()) {
        let diff = mean_rank[j] - mean_rank[i];
        let se = (base * (1.0 / groups[i].values.len() as f64 + 1.0 / groups[j].values.len() as f64)).sqrt();
        let (z, p) = if se > 0.0 { (diff / se, (2.0 * normal_sf((diff / se).abs())).min(1.0)) } else { (0.0, 1.0) };
        rows.push(PairwiseRow {
            group1: groups[i].name.clone(),
            group2: groups[j].name.clone(),
            estimate: diff,
            statistic: z,
            p_value: p,
            p_adjusted: None,
        });
    }
    let adjusted = holm(&rows.iter().map(|r| r.p_value).collect::<Vec<_>>());
    for (row, adj) in rows.iter_mut().zip(adjusted) {
        row.p_adjusted = Some(adj);
    }
    let kw = kruskal_wallis(groups)?;
    let mut report = TestReport::new("Dunn", kw.statistic, kw.p_value, kw.df, groups);
    report.pairwise = rows;
    report.notes.push("Holm-adjusted p-values; summary statistic is Kruskal-Wallis H".into());
    Ok(report)
}

/// Vargha-Delaney A: `P(X > Y) + 0.5 P(X = Y)`.
pub fn vda<T: Scalar>(x: &[T], y: &[T]) -> f64 {
    assert!(!x.is_empty() && !y.is_empty(), "VDA needs two non-empty samples");
    let all: Vec<T> = x.iter().chain(y.iter()).copied().collect();
    let (ranks, _) = midranks(&all);
    let m = x.len() as f64;
    let n = y.len() as f64;
    let r1: f64 = ranks[..x.len()].iter().sum();
    (r1 / m - (m + 1.0) / 2.0) / n
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub group1: String,
    pub group2: String,
    /// `A(group2, group1)`: probability that group2 scores higher.
    pub a: f64,
}

/// Vargha-Delaney A for every pair, oriented as group2 against group1.
pub fn vda_pairwise(groups: &[Group]) -> Vec<EffectSize> {
    pairs(groups.len())
        .map(|(i, j)| EffectSize {
            group1: groups[i].name.clone(),
            group2: groups[j].name.clone(),
            a: vda(&groups[j].values, &groups[i].values),
        })
        .collect()
}

/// Conventional magnitude labels for A (distance from 0.5).
pub fn vda_magnitude(a: f64) -> &'static str {
    let d = (a - 0.5).abs();
    if d < 0.06 {
        "negligible"
    } else if d < 0.14 {
        "small"
    } else if d < 0.21 {
        "medium"
    } else {
        "large"
    }
}
