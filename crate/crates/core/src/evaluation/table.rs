//! Plain-text results table: one group per architecture, one row per
//! modality subset, discrete then continuous scores.

use std::fmt::Write as _;

use super::loocv::EvalReport;
use crate::error::{Error, Result};
use crate::models::Architecture;

const WIDTHS: [usize; 5] = [12, 16, 6, 6, 11];
const HEADINGS: [&str; 5] = ["Accuracy (%)", "Accuracy ± 1 (%)", "MAE", "MSE", "Correlation"];

fn group_title(a: Architecture) -> &'static str {
    match a {
        Architecture::Fc => "Model with FC layers",
        Architecture::Lstm => "Model with LSTM",
    }
}

fn rule(label_width: usize) -> String {
    let inner: usize = WIDTHS.iter().map(|w| w + 3).sum();
    format!("{}+{}\n", "-".repeat(label_width), "-".repeat(inner))
}

fn cells(label: &str, values: [String; 5], label_width: usize) -> String {
    let mut line = format!("{label:<label_width$}|");
    for (v, w) in values.iter().zip(WIDTHS) {
        let _ = write!(line, " {v:>w$} |");
    }
    line.push('\n');
    line
}

/// Renders reports of one emotion dimension. Groups appear FC first, rows
/// single modalities first and the full fusion last.
pub fn render_table(reports: &[EvalReport]) -> Result<String> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InsufficientData("no reports to tabulate".into()))?;
    if let Some(r) = reports.iter().find(|r| r.dimension != first.dimension) {
        return Err(Error::invalid(format!(
            "cannot mix {} and {} reports in one table",
            first.dimension, r.dimension
        )));
    }

    let label_width = reports
        .iter()
        .map(|r| r.modalities.table_label().chars().count() + 4)
        .chain([group_title(Architecture::Fc).len() + 2, 28])
        .max()
        .unwrap_or(28);
    let discrete = WIDTHS[0] + WIDTHS[1] + 3;
    let continuous = WIDTHS[2] + WIDTHS[3] + WIDTHS[4] + 6;

    let mut out = String::new();
    let _ = writeln!(out, "Leave-one-out cross-validation results for {}", first.dimension);
    out.push('\n');
    let _ = writeln!(
        out,
        "{:<label_width$}| {:^discrete$} | {:^continuous$} |",
        "", "Discrete case", "Continuous case"
    );
    out.push_str(&cells("", HEADINGS.map(String::from), label_width));
    out.push_str(&rule(label_width));

    let mut any_partial = false;
    for arch in [Architecture::Fc, Architecture::Lstm] {
        let mut rows: Vec<&EvalReport> = reports.iter().filter(|r| r.architecture == arch).collect();
        if rows.is_empty() {
            continue;
        }
        rows.sort_by_key(|r| (r.modalities.len(), r.modalities.iter().collect::<Vec<_>>()));
        out.push_str(&cells(group_title(arch), Default::default(), label_width));
        for r in rows {
            let mut label = format!("  {}", r.modalities.table_label());
            if r.partial {
                label.push_str(" *");
                any_partial = true;
            }
            let values = match r.aggregate {
                Some(m) => [
                    format!("{:.2}", 100.0 * m.accuracy),
                    format!("{:.2}", 100.0 * m.accuracy_pm1),
                    format!("{:.2}", m.mae),
                    format!("{:.2}", m.mse),
                    format!("{:.2}", m.pearson),
                ],
                None => ["n/a", "n/a", "n/a", "n/a", "n/a"].map(String::from),
            };
            out.push_str(&cells(&label, values, label_width));
        }
        out.push_str(&rule(label_width));
    }
    if any_partial {
        out.push_str("* some folds failed; averaged over the completed folds only\n");
    }
    Ok(out)
}
