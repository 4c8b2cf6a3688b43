//! Normality and variance checks, one-way ANOVA, Tukey-Kramer.

use super::descriptive::{mean, median, sorted};
use super::dist::{f_sf, normal_quantile, normal_sf, studentized_range_sf};
use super::{pairs, require_groups, Group, PairwiseRow, StatsError, TermRow, TestReport};

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Shapiro-Wilk W and p-value, using Royston's coefficient and p-value
/// approximations (valid for 3 <= n <= 5000).
pub fn shapiro_wilk(values: &[f64]) -> Result<(f64, f64), StatsError> {
    let n = values.len();
    if !(3..=5000).contains(&n) {
        return Err(StatsError::TooFewObservations {
            test: "Shapiro-Wilk",
            need: "between 3 and 5000 observations".into(),
            got: n.to_string(),
        });
    }
    let x = sorted(values);
    let range = x[n - 1] - x[0];
    if range < 1e-19 * x[n - 1].abs().max(1.0) {
        return Err(StatsError::ZeroVariance("Shapiro-Wilk: all values are equal".into()));
    }
    let nf = n as f64;
    let half = n / 2;
    // Coefficients for the upper half, a[i] pairs with x[n - 1 - i] (+) and x[i] (-).
    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let m: Vec<f64> = (1..=half).map(|i| -normal_quantile((i as f64 - 0.375) / (nf + 0.25))).collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let u = 1.0 / nf.sqrt();
        let a1 = m[0] / ssumm2 + poly(&[0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056], u);
        let (fac, first) = if n > 5 {
            let a2 = m[1] / ssumm2 + poly(&[0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633], u);
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
            a[1] = a2;
            (fac, 2)
        } else {
            (((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt(), 1)
        };
        a[0] = a1;
        for i in first..half {
            a[i] = m[i] / fac;
        }
    }
    let xbar = mean(&x);
    let ssx: f64 = x.iter().map(|v| (v - xbar) * (v - xbar)).sum();
    let num: f64 = (0..half).map(|i| a[i] * (x[n - 1 - i] - x[i])).sum();
    let w = (num * num / ssx).min(1.0);
    let w1 = 1.0 - w;

    let p = if n == 3 {
        let p = 6.0 / std::f64::consts::PI * (w.sqrt().asin() - (0.75f64).sqrt().asin());
        p.max(0.0)
    } else if n <= 11 {
        let gamma = poly(&[-2.273, 0.459], nf);
        let y = w1.ln();
        if y >= gamma {
            1e-99
        } else {
            let y = -(gamma - y).ln();
            let mu = poly(&[0.544, -0.39978, 0.025054, -6.714e-4], nf);
            let s = poly(&[1.3822, -0.77857, 0.062767, -0.0020322], nf).exp();
            normal_sf((y - mu) / s)
        }
    } else {
        let ln_n = nf.ln();
        let mu = poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], ln_n);
        let s = poly(&[-0.4803, -0.082676, 0.0030302], ln_n).exp();
        normal_sf((w1.ln() - mu) / s)
    };
    Ok((w, p))
}

/// One-way ANOVA: (F, df_between, df_within, p).
pub fn one_way_anova(groups: &[Group]) -> Result<(f64, f64, f64, f64), StatsError> {
    require_groups("one-way ANOVA", groups, 2, 1)?;
    let all: Vec<f64> = groups.iter().flat_map(|g| g.values.iter().copied()).collect();
    let n = all.len();
    let k = groups.len();
    if n <= k {
        return Err(StatsError::TooFewObservations { test: "one-way ANOVA", need: "more observations than groups".into(), got: n.to_string() });
    }
    let grand = mean(&all);
    let ssb: f64 = groups.iter().map(|g| g.values.len() as f64 * (mean(&g.values) - grand).powi(2)).sum();
    let ssw: f64 = groups.iter().map(|g| {
        let m = mean(&g.values);
        g.values.iter().map(|v| (v - m).powi(2)).sum::<f64>()
    }).sum();
    let df1 = (k - 1) as f64;
    let df2 = (n - k) as f64;
    if ssw == 0.0 {
        return Err(StatsError::ZeroVariance("one-way ANOVA: no within-group variance".into()));
    }
    let f = (ssb / df1) / (ssw / df2);
    Ok((f, df1, df2, f_sf(f, df1, df2)))
}

/// Levene's test centred on group medians (Brown-Forsythe variant).
pub fn levene(groups: &[Group]) -> Result<TestReport, StatsError> {
    require_groups("Levene", groups, 2, 2)?;
    let dev: Vec<Group> = groups
        .iter()
        .map(|g| {
            let med = median(&g.values);
            Group::new(g.name.clone(), g.values.iter().map(|v| (v - med).abs()).collect())
        })
        .collect();
    let (f, df1, df2, p) = one_way_anova(&dev)?;
    let mut report = TestReport::new("Levene (median)", f, p, vec![df1, df2], groups);
    report.notes.push("absolute deviations from group medians".into());
    Ok(report)
}

/// Per-group Shapiro-Wilk plus Levene across groups. The summary statistic of
/// the normality report is the smallest W and its p-value is the smallest p.
pub fn normality_and_variance_checks(groups: &[Group]) -> Result<(TestReport, TestReport), StatsError> {
    require_groups("normality checks", groups, 1, 3)?;
    let mut rows = Vec::with_capacity(groups.len());
    for g in groups {
        let (w, p) = shapiro_wilk(&g.values)?;
        rows.push(TermRow::test(g.name.clone(), w, p));
    }
    let min_w = rows.iter().map(|r| r.statistic).fold(f64::INFINITY, f64::min);
    let min_p = rows.iter().map(|r| r.p_value).fold(f64::INFINITY, f64::min);
    let mut normality = TestReport::new("Shapiro-Wilk", min_w, min_p, vec![], groups);
    normality.rows = rows;
    normality.notes.push("summary is the minimum over groups".into());
    let variance = levene(groups)?;
    Ok((normality, variance))
}

/// Tukey-Kramer HSD for all pairs. The report statistic is the one-way ANOVA F;
/// each pair carries `mean(group2) - mean(group1)`, the studentized range
/// statistic and its p-value.
pub fn tukey_kramer(groups: &[Group]) -> Result<TestReport, StatsError> {
    require_groups("Tukey-Kramer", groups, 2, 1)?;
    let (f, df1, df2, p) = one_way_anova(groups)?;
    let k = groups.len();
    let n: usize = groups.iter().map(|g| g.values.len()).sum();
    let ssw: f64 = groups.iter().map(|g| {
        let m = mean(&g.values);
        g.values.iter().map(|v| (v - m).powi(2)).sum::<f64>()
    }).sum();
    let mse = ssw / (n - k) as f64;
    let means: Vec<f64> = groups.iter().map(|g| mean(&g.values)).collect();
    let mut report = TestReport::new("Tukey-Kramer HSD", f, p, vec![df1, df2], groups);
    for (i, j) in pairs(k) {
        let diff = means[j] - means[i];
        let se = (mse / 2.0 * (1.0 / groups[i].values.len() as f64 + 1.0 / groups[j].values.len() as f64)).sqrt();
        let q = diff.abs() / se;
        report.pairwise.push(PairwiseRow {
            group1: groups[i].name.clone(),
            group2: groups[j].name.clone(),
            estimate: diff,
            statistic: q,
            p_value: studentized_range_sf(q, k as f64, df2),
            p_adjusted: None,
        });
    }
    report.notes.push("p-values from the studentized range distribution".into());
    Ok(report)
}
