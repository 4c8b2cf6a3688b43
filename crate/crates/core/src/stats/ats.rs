//! ANOVA-type statistic for one-way layouts on relative effects.
//!
//! With pooled mid-ranks `R`, relative effects `p_i = (mean(R_i) - 1/2) / N`
//! and rank variances `s_i^2 = sum (R_ik - mean(R_i))^2 / (N^2 (n_i - 1))`, the
//! covariance estimate is `V = N diag(s_i^2 / n_i)`. With the centring matrix
//! `T = I - J/a` the statistic is `F = N p'Tp / tr(TV)`, referred to an F
//! distribution with Box-approximated degrees of freedom
//! `f1 = tr(TV)^2 / tr(TVTV)` and `f2 = tr(TV)^2 / tr(D_T^2 V^2 L)`, where
//! `D_T = diag(T)` and `L = diag(1 / (n_i - 1))`.

use nalgebra::{DMatrix, DVector};

use super::descriptive::midranks;
use super::dist::f_sf;
use super::{require_groups, Group, StatsError, TestReport};

pub fn anova_type_test(groups: &[Group]) -> Result<TestReport, StatsError> {
    require_groups("ANOVA-type statistic", groups, 2, 2)?;
    let a = groups.len();
    let all: Vec<f64> = groups.iter().flat_map(|g| g.values.iter().copied()).collect();
    let n = all.len() as f64;
    let (ranks, _) = midranks(&all);

    let mut effects = DVector::zeros(a);
    let mut v = DVector::zeros(a);
    let mut at = 0;
    for (i, g) in groups.iter().enumerate() {
        let r = &ranks[at..at + g.values.len()];
        at += g.values.len();
        let ni = r.len() as f64;
        let rbar = r.iter().sum::<f64>() / ni;
        effects[i] = (rbar - 0.5) / n;
        let s2 = r.iter().map(|x| (x - rbar).powi(2)).sum::<f64>() / (n * n * (ni - 1.0));
        v[i] = n * s2 / ni;
    }
    let t = DMatrix::identity(a, a) - DMatrix::from_element(a, a, 1.0 / a as f64);
    let vm = DMatrix::from_diagonal(&v);
    let tv = &t * &vm;
    let tr_tv = tv.trace();
    if tr_tv <= 0.0 {
        return Err(StatsError::ZeroVariance("ANOVA-type statistic: no within-group rank variance".into()));
    }
    let tr_tvtv = (&tv * &tv).trace();
    let quad = (effects.transpose() * &t * &effects)[(0, 0)];
    let stat = n * quad / tr_tv;
    let dt = 1.0 - 1.0 / a as f64;
    let denom2: f64 = groups
        .iter()
        .enumerate()
        .map(|(i, g)| dt * dt * v[i] * v[i] / (g.values.len() as f64 - 1.0))
        .sum();
    let f1 = tr_tv * tr_tv / tr_tvtv;
    let f2 = tr_tv * tr_tv / denom2;
    let mut report = TestReport::new("ANOVA-type statistic", stat, f_sf(stat, f1, f2), vec![f1, f2], groups);
    let listed: Vec<String> = groups.iter().enumerate().map(|(i, g)| format!("{}={:.4}", g.name, effects[i])).collect();
    report.notes.push(format!("relative effects: {}", listed.join(", ")));
    report.notes.push("relative effects from pooled mid-ranks; F reference with Box-approximated df".into());
    Ok(report)
}
