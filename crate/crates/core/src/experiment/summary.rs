//! Grouped statistics over result tables.

use std::path::Path;

use crate::error::{CoreError, Result};
use crate::experiment::{ResultRow, ResultTable};

/// Statistics of one (task, mode, ground truth, query count) group.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub task: String,
    pub mode: String,
    pub p_real: String,
    pub query_count: usize,
    pub n: usize,
    /// Mean and population variance of the scalar inferred proportion;
    /// NaN when the group's inferences are not scalar (multi-class rows).
    pub mean_infer: f64,
    pub var_infer: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// Mean deviation from the benchmark line.
    pub mean_abs_diff: f64,
}

/// Nearest-rank quantile of a sorted slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Group rows by (task, mode, p_real, query_count) and report mean, variance,
/// and quartiles of the inferred proportion plus the mean absolute difference.
pub fn summarize(tables: &[&ResultTable]) -> Result<Vec<SummaryRow>> {
    let rows: Vec<&ResultRow> = tables.iter().flat_map(|t| t.rows.iter()).collect();
    if rows.is_empty() {
        return Err(CoreError::EmptyInput("summarize tables"));
    }
    let mut keys: Vec<(String, String, String, usize)> = Vec::new();
    for r in &rows {
        let key = (
            r.task.clone(),
            r.mode.clone(),
            r.p_real.clone(),
            r.query_count,
        );
        if !keys.contains(&key) {
            keys.push(key);
        }
    }

    let mut out = Vec::with_capacity(keys.len());
    for (task, mode, p_real, query_count) in keys {
        let group: Vec<&&ResultRow> = rows
            .iter()
            .filter(|r| {
                r.task == task
                    && r.mode == mode
                    && r.p_real == p_real
                    && r.query_count == query_count
            })
            .collect();
        let n = group.len();
        let infers: Vec<f64> = group
            .iter()
            .map(|r| r.p_infer.parse::<f64>().unwrap_or(f64::NAN))
            .collect();
        let scalar = infers.iter().all(|v| v.is_finite());
        let (mean_infer, var_infer, q1, median, q3) = if scalar {
            let mean = infers.iter().sum::<f64>() / n as f64;
            let var = infers.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let mut sorted = infers.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            (
                mean,
                var,
                quantile_sorted(&sorted, 0.25),
                quantile_sorted(&sorted, 0.5),
                quantile_sorted(&sorted, 0.75),
            )
        } else {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        };
        let mean_abs_diff = group.iter().map(|r| r.abs_diff).sum::<f64>() / n as f64;
        out.push(SummaryRow {
            task,
            mode,
            p_real,
            query_count,
            n,
            mean_infer,
            var_infer,
            q1,
            median,
            q3,
            mean_abs_diff,
        });
    }
    Ok(out)
}

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "task",
        "mode",
        "p_real",
        "query_count",
        "n",
        "mean_infer",
        "var_infer",
        "q1",
        "median",
        "q3",
        "mean_abs_diff",
    ])?;
    let fmt = |v: f64| if v.is_nan() { String::new() } else { v.to_string() };
    for r in rows {
        writer.write_record([
            r.task.clone(),
            r.mode.clone(),
            r.p_real.clone(),
            r.query_count.to_string(),
            r.n.to_string(),
            fmt(r.mean_infer),
            fmt(r.var_infer),
            fmt(r.q1),
            fmt(r.median),
            fmt(r.q3),
            fmt(r.mean_abs_diff),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
