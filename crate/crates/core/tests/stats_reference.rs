use distill_core::stats::{
    anova_two_way, dunn_test, kruskal_wallis, levene, ols, quality_regression, shapiro_wilk, tukey_kramer, Baselines, Group,
    RegressionRow, TwoWayObservation,
};
use distill_core::ModelVariant;
use serde_json::Value;

const TOL: f64 = 1e-4;

fn reference() -> Value {
    serde_json::from_str(include_str!("fixtures/stats_reference.json")).unwrap()
}

fn groups(v: &Value, key: &str) -> Vec<Group> {
    let names = v["names"].as_array().unwrap();
    v[key]
        .as_array()
        .unwrap()
        .iter()
        .zip(names)
        .map(|(g, n)| Group::new(n.as_str().unwrap(), g.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()))
        .collect()
}

fn close(got: f64, want: &Value, what: &str) {
    let want = want.as_f64().unwrap();
    assert!((got - want).abs() <= TOL, "{what}: got {got}, reference {want}");
}

#[test]
fn tukey_matches_reference() {
    let v = reference();
    let report = tukey_kramer(&groups(&v, "continuous")).unwrap();
    for row in v["tukey"].as_array().unwrap() {
        let pair = report.pair(row["group1"].as_str().unwrap(), row["group2"].as_str().unwrap()).unwrap();
        close(pair.estimate, &row["estimate"], "tukey estimate");
        close(pair.p_value, &row["p_value"], "tukey p");
    }
}

#[test]
fn dunn_and_kruskal_match_reference() {
    let v = reference();
    let g = groups(&v, "likert");
    let kw = kruskal_wallis(&g).unwrap();
    close(kw.statistic, &v["kruskal"]["h"], "H");
    close(kw.p_value, &v["kruskal"]["p_value"], "KW p");
    let report = dunn_test(&g).unwrap();
    for row in v["dunn"].as_array().unwrap() {
        let pair = report.pair(row["group1"].as_str().unwrap(), row["group2"].as_str().unwrap()).unwrap();
        close(pair.p_value, &row["p_value"], "dunn p");
        close(pair.p_adjusted.unwrap(), &row["p_adjusted"], "dunn holm p");
    }
}

#[test]
fn shapiro_and_levene_match_reference() {
    let v = reference();
    let g = groups(&v, "continuous");
    for (grp, want) in g.iter().zip(v["shapiro"].as_array().unwrap()) {
        let (w, p) = shapiro_wilk(&grp.values).unwrap();
        close(w, &want["w"], "W");
        close(p, &want["p_value"], "shapiro p");
    }
    let lev = levene(&g).unwrap();
    close(lev.statistic, &v["levene"]["f"], "levene F");
    close(lev.p_value, &v["levene"]["p_value"], "levene p");
}

#[test]
fn two_way_anova_matches_reference() {
    let v = reference();
    let data: Vec<TwoWayObservation> = serde_json::from_value(v["two_way"]["data"].clone()).unwrap();
    let report = anova_two_way(&data, "a", "b").unwrap();
    for term in ["a", "b", "a:b"] {
        let want = &v["two_way"]["rows"][term];
        let row = report.row(term).unwrap();
        close(row.sum_sq.unwrap(), &want["sum_sq"], "sum_sq");
        close(row.df.unwrap(), &want["df"], "df");
        close(row.statistic, &want["F"], "F");
        close(row.p_value, &want["p_value"], "p");
    }
    close(report.row("Residual").unwrap().df.unwrap(), &v["two_way"]["rows"]["Residual"]["df"], "resid df");
}

#[test]
fn regression_matches_reference() {
    let v = reference();
    let rows: Vec<RegressionRow> = v["regression"]["data"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| RegressionRow {
            variant: r["variant"].as_str().unwrap().parse::<ModelVariant>().unwrap(),
            quality: r["quality"].as_f64().unwrap(),
            explanation_length: r["length"].as_f64().unwrap(),
            gender: String::new(),
            age_band: String::new(),
            country: String::new(),
            education: String::new(),
            employment: String::new(),
        })
        .collect();
    let report = quality_regression(&rows, &Baselines::default(), false).unwrap();
    for (term, want) in v["regression"]["coefficients"].as_object().unwrap() {
        let row = report.row(term).unwrap_or_else(|| panic!("missing {term}"));
        close(row.estimate.unwrap(), &want["estimate"], term);
        close(row.std_error.unwrap(), &want["std_error"], term);
        close(row.p_value, &want["p_value"], term);
    }
}

#[test]
fn constant_length_is_dropped_with_a_diagnostic() {
    let rows: Vec<RegressionRow> = (0..40)
        .map(|i| RegressionRow {
            variant: ModelVariant::CANONICAL[i % 4],
            quality: 3.0 + (i % 4) as f64 * 0.1 + (i % 7) as f64 * 0.05,
            explanation_length: 25.0,
            gender: "female".into(),
            age_band: "x".into(),
            country: "y".into(),
            education: "z".into(),
            employment: "w".into(),
        })
        .collect();
    let report = quality_regression(&rows, &Baselines::default(), false).unwrap();
    assert!(report.row("explanation_length").is_none());
    assert!(report.notes.iter().any(|n| n.contains("dropped `explanation_length`")), "{:?}", report.notes);
    assert!(report.row("variant=MT+CF:Revised").is_some());
}

#[test]
fn ols_drops_collinear_dummies() {
    let a: Vec<f64> = (0..20).map(|i| (i % 2) as f64).collect();
    let b: Vec<f64> = a.iter().map(|x| 1.0 - x).collect();
    let y: Vec<f64> = (0..20).map(|i| i as f64 * 0.3 + (i % 3) as f64).collect();
    let cols = vec![
        distill_core::stats::linear::Column::new("(Intercept)", vec![1.0; 20]),
        distill_core::stats::linear::Column::new("a", a),
        distill_core::stats::linear::Column::new("b", b),
    ];
    let fit = ols(&y, &cols).unwrap();
    assert_eq!(fit.dropped, vec!["b".to_string()]);
    assert_eq!(fit.rank(), 2);
}
