use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Median; the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty list");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Median absolute deviation from the median.
pub fn mad(values: &[f64]) -> f64 {
    let m = median(values);
    median(&values.iter().map(|v| (v - m).abs()).collect::<Vec<_>>())
}

/// One candidate model compared split-by-split against the reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub pr_auc: Vec<f64>,
    pub gaps: Vec<f64>,
    pub median_gap: f64,
    pub mad: f64,
}

/// Gaps `candidate − reference` per split with their median and MAD.
pub fn median_gap_report(model: &str, runs: &[(f64, f64)]) -> Result<ReportRow> {
    if runs.len() < 3 {
        return Err(Error::Config(format!(
            "median gap needs at least 3 splits, got {}",
            runs.len()
        )));
    }
    let gaps: Vec<f64> = runs.iter().map(|(c, r)| c - r).collect();
    Ok(ReportRow {
        model: model.to_string(),
        pr_auc: runs.iter().map(|r| r.0).collect(),
        median_gap: median(&gaps),
        mad: mad(&gaps),
        gaps,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub reference: String,
    pub reference_pr_auc: Vec<f64>,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn row(&self, model: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    pub fn to_table(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.model.len())
            .chain([self.reference.len(), 5])
            .max()
            .unwrap_or(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>12}  {:>8}  {:>10}",
            "model", "median gap", "MAD", "median AP"
        );
        let _ = writeln!(
            out,
            "{:<width$}  {:>12}  {:>8}  {:>10.4}",
            self.reference,
            "-",
            "-",
            median(&self.reference_pr_auc)
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>+12.4}  {:>8.4}  {:>10.4}",
                r.model,
                r.median_gap,
                r.mad,
                median(&r.pr_auc)
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serialises")
    }
}
