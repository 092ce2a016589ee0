//! Writes a benchmark outcome to disk: three CSV summaries plus the full
//! report as JSON. Output is a pure function of the report value, so two
//! writes of the same report are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EvaluationReport, HarnessError};

/// Five-number summary with Tukey whiskers: the most extreme data points
/// within 1.5 interquartile ranges of the quartiles; everything beyond is
/// an outlier.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub lo_whisker: f64,
    pub hi_whisker: f64,
    pub outliers: Vec<f64>,
}

/// Linear-interpolation quantile over an ascending slice: the value at
/// fractional position (n-1)q. Panics on an empty slice or q outside
/// [0, 1].
pub fn quantile_type7(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty slice");
    assert!((0.0..=1.0).contains(&q), "quantile fraction {q} outside [0, 1]");
    let n = sorted.len();
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn box_stats(values: &[f64]) -> BoxStats {
    assert!(!values.is_empty(), "box stats of an empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_type7(&sorted, 0.25);
    let median = quantile_type7(&sorted, 0.5);
    let q3 = quantile_type7(&sorted, 0.75);
    let reach = 1.5 * (q3 - q1);
    let lo_fence = q1 - reach;
    let hi_fence = q3 + reach;
    // The extremes inside the fences always exist: the data maximum sits
    // above the low fence and the minimum below the high one.
    let lo_whisker = sorted.iter().copied().find(|&v| v >= lo_fence).unwrap();
    let hi_whisker = sorted.iter().rev().copied().find(|&v| v <= hi_fence).unwrap();
    let outliers = sorted.iter().copied().filter(|&v| v < lo_fence || v > hi_fence).collect();
    BoxStats { q1, median, q3, lo_whisker, hi_whisker, outliers }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn per_dataset_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("dataset,method,selected_metric,tau_w,rank\n");
    for (fold, ranks) in report.folds.iter().zip(&report.ranks) {
        for (sel, rank) in fold.selections.iter().zip(ranks) {
            let _ = writeln!(
                out,
                "{},{},{},{:.4},{rank:.4}",
                csv_field(&fold.dataset),
                csv_field(&sel.method),
                csv_field(&sel.selected_metric),
                sel.tau_w,
            );
        }
    }
    out
}

fn mean_ranks_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("method,mean_rank\n");
    for (method, mean) in report.methods.iter().zip(&report.mean_ranks) {
        let _ = writeln!(out, "{},{mean:.4}", csv_field(method));
    }
    out
}

fn boxstats_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("method,q1,median,q3,lo_whisker,hi_whisker,outliers\n");
    for (m, method) in report.methods.iter().enumerate() {
        let column: Vec<f64> = report.ranks.iter().map(|row| row[m]).collect();
        let stats = box_stats(&column);
        let outliers = stats
            .outliers
            .iter()
            .map(|v| format!("{v:.4}"))
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(
            out,
            "{},{:.4},{:.4},{:.4},{:.4},{:.4},{outliers}",
            csv_field(method),
            stats.q1,
            stats.median,
            stats.q3,
            stats.lo_whisker,
            stats.hi_whisker,
        );
    }
    out
}

/// Writes per_dataset.csv, mean_ranks.csv, boxstats.csv and report.json
/// into `dir`, creating it if needed.
pub fn write_reports(report: &EvaluationReport, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("per_dataset.csv"), per_dataset_csv(report))?;
    fs::write(dir.join("mean_ranks.csv"), mean_ranks_csv(report))?;
    fs::write(dir.join("boxstats.csv"), boxstats_csv(report))?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;
    Ok(())
}
