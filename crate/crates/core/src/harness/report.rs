//! Aggregation of per-run step series into per-planner means.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluation::{read_steps_csv, StepRecord};

pub const REPORT_HEADER: &str = "planner,step,runs,nodes_pred_mean,nodes_pred_std,precision_mean,precision_std,\
recall_mean,recall_std,f1_mean,f1_std,travel_m_mean,travel_m_std";

/// Mean and sample standard deviation of each metric over the runs that
/// reached `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub planner: String,
    pub step: usize,
    pub runs: usize,
    pub nodes_pred: (f64, f64),
    pub precision: (f64, f64),
    pub recall: (f64, f64),
    pub f1: (f64, f64),
    pub travel_m: (f64, f64),
}

impl ReportRow {
    pub fn csv_row(&self) -> String {
        let pairs = [self.nodes_pred, self.precision, self.recall, self.f1, self.travel_m];
        let mut s = format!("{},{},{}", self.planner, self.step, self.runs);
        for (m, sd) in pairs {
            s.push_str(&format!(",{m:.6},{sd:.6}"));
        }
        s
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups rows by `(planner, step)`; each slice is one run.
pub fn aggregate_records(runs: &[Vec<StepRecord>]) -> Vec<ReportRow> {
    let mut groups: BTreeMap<(String, usize), Vec<&StepRecord>> = BTreeMap::new();
    for run in runs {
        for r in run {
            groups.entry((r.planner.clone(), r.step)).or_default().push(r);
        }
    }
    groups
        .into_iter()
        .map(|((planner, step), rows)| {
            let col = |f: fn(&StepRecord) -> f64| mean_std(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            ReportRow {
                planner,
                step,
                runs: rows.len(),
                nodes_pred: col(|r| r.nodes_pred as f64),
                precision: col(|r| r.precision),
                recall: col(|r| r.recall),
                f1: col(|r| r.f1),
                travel_m: col(|r| r.travel_m),
            }
        })
        .collect()
}

/// All `steps.csv` files under `root`, sorted by path.
pub fn find_step_files(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == "steps.csv") {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Reads every `steps.csv` under the given directories and aggregates them.
pub fn aggregate_dirs(dirs: &[PathBuf]) -> Result<Vec<ReportRow>> {
    let mut runs = Vec::new();
    for d in dirs {
        for f in find_step_files(d)? {
            runs.push(read_steps_csv(&f)?);
        }
    }
    Ok(aggregate_records(&runs))
}

pub fn write_report_csv(mut w: impl Write, rows: &[ReportRow]) -> std::io::Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}
