//! Plain-text tables.

use super::{stars, TestReport};

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, cell) in width.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<String>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&width)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        padded.join("  ").trim_end().to_string()
    };
    let mut out = vec![line(header.iter().map(|h| h.to_string()).collect())];
    out.push(width.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("  "));
    out.extend(rows.iter().map(|r| line(r.clone())));
    out.join("\n") + "\n"
}

/// `Model 1 | Model 2 | Estimate`, with stars from the adjusted p-value when
/// present. A leading `Size` column is added when `size` is given.
pub fn render_pairwise_table(report: &TestReport, size: Option<&str>) -> String {
    let rows: Vec<Vec<String>> = report
        .pairwise
        .iter()
        .map(|p| {
            let mut r = Vec::new();
            if let Some(s) = size {
                r.push(s.to_string());
            }
            r.push(p.group1.clone());
            r.push(p.group2.clone());
            r.push(format!("{:.4}{}", p.estimate, stars(p.reported_p())));
            r
        })
        .collect();
    let header: Vec<&str> = size.map(|_| "Size").into_iter().chain(["Model 1", "Model 2", "Estimate"]).collect();
    table(&header, &rows)
}

/// `Variable | Estimate | Std. Error` for regression reports.
pub fn render_regression_table(report: &TestReport) -> String {
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.term.clone(),
                format!("{:.3}{}", r.estimate.unwrap_or(f64::NAN), stars(r.p_value)),
                r.std_error.map(|s| format!("{s:.3}")).unwrap_or_default(),
            ]
        })
        .collect();
    table(&["Variable", "Estimate", "Std. Error"], &rows)
}
