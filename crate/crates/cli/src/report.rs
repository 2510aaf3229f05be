//! Reading evaluation reports and rendering comparison tables.

use std::fs;
use std::path::Path;

use gancmp::metrics::{round_half_even, EvalReport};

use crate::error::{CliError, CliResult};

pub fn read_report(path: &Path) -> CliResult<EvalReport> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let malformed = |reason: String| CliError::Report { path: path.to_path_buf(), reason };
    let report: EvalReport = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
    for (field, v) in [
        ("precision", report.precision),
        ("recall", report.recall),
        ("accuracy", report.accuracy),
        ("f1", report.f1),
        ("auc", report.auc),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(malformed(format!("{field} = {v} is outside [0, 1]")));
        }
    }
    if report.roc.iter().any(|p| !(0.0..=1.0).contains(&p.fpr) || !(0.0..=1.0).contains(&p.tpr)) {
        return Err(malformed("roc point outside the unit square".into()));
    }
    Ok(report)
}

/// Two decimals, rounding half to even.
pub fn fmt2(value: f64) -> String {
    format!("{:.2}", round_half_even(value, 2))
}

/// Markdown table with one row per report, in the order given.
pub fn comparison_table(reports: &[EvalReport]) -> String {
    let mut out = String::from("| Model | Precision | Recall | Accuracy | F1 |\n|---|---|---|---|---|\n");
    for r in reports {
        out += &format!(
            "| {} | {} | {} | {} | {} |\n",
            r.model,
            fmt2(r.precision),
            fmt2(r.recall),
            fmt2(r.accuracy),
            fmt2(r.f1)
        );
    }
    out
}
