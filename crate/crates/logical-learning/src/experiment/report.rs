//! Cross-run comparison: a Tables 3/4-style summary over result
//! directories plus the paper's four-group aggregation (Fig. 7).
//!
//! The report is a pure function of the metrics files it reads, so
//! re-running it over the same directories yields byte-identical text.

use std::path::{Path, PathBuf};

use crate::scheme::HYBRID_CASES;

use super::metrics::{parse_metrics, StoredMetrics};
use super::ExperimentError;

/// The paper's case groups: singleton meaningful split, equal halves,
/// unequal/many groups, and fully split (Fig. 7 x-axis).
pub const GROUPS: [(&str, &[&str]); 4] = [
    ("G1", &["14"]),
    ("G2", &["11", "12", "21"]),
    ("G3", &["13", "22", "23"]),
    ("G4", &["24"]),
];

fn canonical_rank(case: &str) -> usize {
    if case == "benchmark" {
        return 0;
    }
    HYBRID_CASES
        .iter()
        .position(|&c| c == case)
        .map(|i| i + 1)
        .unwrap_or(usize::MAX)
}

/// Percent with two decimals, the paper tables' precision; NaN (the
/// no-logical-items sentinel) renders as a dash.
fn pct(rate: f64) -> String {
    if rate.is_nan() {
        "-".to_string()
    } else {
        format!("{:.2}%", rate * 100.0)
    }
}

pub(super) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn load_result(dir: &Path) -> Result<StoredMetrics, ExperimentError> {
    let path = dir.join("metrics.txt");
    if !path.exists() {
        return Err(ExperimentError::MissingResult(dir.to_path_buf()));
    }
    let text = std::fs::read_to_string(&path).map_err(|source| ExperimentError::Io {
        path: path.clone(),
        source,
    })?;
    parse_metrics(&text).map_err(|reason| ExperimentError::BadMetricsFile { path, reason })
}

/// Renders the comparison table and group summary over result bundles
/// previously written by `run`/`evaluate`.
pub fn report(dirs: &[PathBuf]) -> Result<String, ExperimentError> {
    if dirs.is_empty() {
        return Err(ExperimentError::MissingResult(PathBuf::from(
            "(no result directories given)",
        )));
    }
    let mut rows: Vec<StoredMetrics> = dirs.iter().map(|d| load_result(d)).collect::<Result<_, _>>()?;
    rows.sort_by_key(|row| canonical_rank(row.case_id()));

    let mut out = String::new();
    out.push_str("case         logical pass   logical acc   overall\n");
    out.push_str("---------------------------------------------------\n");
    for row in &rows {
        match row {
            StoredMetrics::Benchmark(b) => {
                out.push_str(&format!(
                    "{:<12} {:>12}   {:>11}   {:>7}\n",
                    "benchmark",
                    "-",
                    "-",
                    pct(b.accuracy())
                ));
            }
            StoredMetrics::Hybrid { case, metrics } => {
                out.push_str(&format!(
                    "{:<12} {:>12}   {:>11}   {:>7}\n",
                    case,
                    pct(metrics.logical_pass_rate()),
                    pct(metrics.logical_accuracy()),
                    pct(metrics.overall_accuracy())
                ));
            }
        }
    }

    out.push_str("\ngroup averages over present cases (logical acc / logical pass)\n");
    out.push_str("---------------------------------------------------\n");
    for (name, members) in GROUPS {
        let mut accs = Vec::new();
        let mut passes = Vec::new();
        for row in &rows {
            if let StoredMetrics::Hybrid { case, metrics } = row {
                if members.contains(&case.as_str()) && metrics.logical > 0 {
                    accs.push(metrics.logical_accuracy());
                    passes.push(metrics.logical_pass_rate());
                }
            }
        }
        let cases = members.join(",");
        if accs.is_empty() {
            out.push_str(&format!("{name} ({cases}): no results\n"));
        } else {
            out.push_str(&format!(
                "{name} ({cases}): {} / {}  [{} of {} cases]\n",
                pct(mean(&accs)),
                pct(mean(&passes)),
                accs.len(),
                members.len()
            ));
        }
    }
    Ok(out)
}
