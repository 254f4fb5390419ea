//! Plot-ready CSV summaries: boolean feature percentages per dataset, CDF
//! series and the HTTP/HTTPS category breakdown.

use crate::features::{FeatureId, FeatureVector};
use crate::harvest::CategoryCounts;
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("no values to summarize")]
    EmptyInput,
}

/// Percent of true values for F1–F8 in each dataset; `None` for empty ones.
#[derive(Debug, Clone, PartialEq)]
pub struct BooleanTable {
    pub columns: Vec<(String, usize)>,
    pub rows: Vec<(FeatureId, Vec<Option<f64>>)>,
}

pub fn boolean_feature_table(datasets: &[(&str, &[FeatureVector])]) -> BooleanTable {
    let rows = FeatureId::BOOLEAN
        .iter()
        .map(|&f| {
            let cells = datasets
                .iter()
                .map(|(_, rows)| {
                    (!rows.is_empty()).then(|| {
                        let t = rows.iter().filter(|r| r.boolean(f) == Some(true)).count();
                        100.0 * t as f64 / rows.len() as f64
                    })
                })
                .collect();
            (f, cells)
        })
        .collect();
    BooleanTable {
        columns: datasets.iter().map(|(n, r)| (n.to_string(), r.len())).collect(),
        rows,
    }
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl BooleanTable {
    pub fn cell_text(v: Option<f64>) -> String {
        v.map_or_else(|| "n/a".to_string(), |p| format!("{p:.1}"))
    }

    pub fn headers(&self) -> Vec<String> {
        self.columns.iter().map(|(n, size)| format!("{n} ({size})")).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature");
        for h in self.headers() {
            out.push(',');
            out.push_str(&csv_cell(&h));
        }
        out.push('\n');
        for (f, cells) in &self.rows {
            out.push_str(&f.name().to_uppercase());
            for c in cells {
                out.push(',');
                out.push_str(&Self::cell_text(*c));
            }
            out.push('\n');
        }
        out
    }
}

/// Sorted distinct values with the fraction of inputs at or below each.
pub fn cdf_series(values: &[f64]) -> Result<Vec<(f64, f64)>, ReportError> {
    if values.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        if i + 1 == n || sorted[i + 1] != *v {
            out.push((*v, (i + 1) as f64 / n as f64));
        }
    }
    Ok(out)
}

pub fn cdf_to_csv(series: &[(f64, f64)]) -> String {
    let mut out = String::from("value,cum_frac\n");
    for (v, f) in series {
        let _ = writeln!(out, "{v},{f}");
    }
    out
}

/// Percentages of responsive domains (HTTP only, HTTPS only, both) per
/// dataset; domains answering on neither port are counted separately.
pub fn category_table_csv(datasets: &[(&str, CategoryCounts)]) -> String {
    let mut out = String::from("dataset,http_only,https_only,both,neither,total\n");
    for (name, c) in datasets {
        let responsive = c.http_only + c.https_only + c.both;
        let pct = |x: usize| {
            if responsive == 0 {
                "n/a".to_string()
            } else {
                format!("{:.1}", 100.0 * x as f64 / responsive as f64)
            }
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_cell(name),
            pct(c.http_only),
            pct(c.https_only),
            pct(c.both),
            c.neither,
            c.total()
        );
    }
    out
}
