//! CSV reports: header row, `.` decimals, `\n` line endings.

use std::path::Path;
use std::time::Instant;

use smoothntf_core::diagnostics::CvResult;
use smoothntf_core::solvers::{Clock, FitReport};

use crate::error::{IoError, IoResult};
use crate::fsutil::write_atomic;

/// Wall clock measured from construction.
#[derive(Debug, Clone, Copy)]
pub struct InstantClock(Instant);

impl InstantClock {
    pub fn new() -> Self {
        InstantClock(Instant::now())
    }
}

impl Default for InstantClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for InstantClock {
    fn now_seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Shortest representation that parses back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn to_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> IoResult<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| IoError::io("<csv buffer>", e.into_error()))
}

/// `iteration,objective,elapsed_seconds`, row 0 being the start point.
pub fn fit_report_csv(report: &FitReport) -> IoResult<Vec<u8>> {
    to_bytes(
        &["iteration", "objective", "elapsed_seconds"],
        report
            .objective_trajectory
            .iter()
            .zip(&report.elapsed_seconds)
            .enumerate()
            .map(|(k, (f, t))| vec![k.to_string(), num(*f), num(*t)]),
    )
}

/// One row per grid value: mean holdout loss, selection flag and per-fold
/// losses. Skipped folds and disqualified values are empty cells.
pub fn cv_result_csv(result: &CvResult) -> IoResult<Vec<u8>> {
    let folds = result.scores.len();
    let mut header = vec!["alpha".to_string(), "mean_holdout_loss".into(), "selected".into()];
    header.extend((1..=folds).map(|k| format!("fold_{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    to_bytes(
        &header,
        result.grid.iter().enumerate().map(|(g, &a)| {
            let mut row = vec![num(a), opt(result.mean[g]), u8::from(g == result.selected_index).to_string()];
            row.extend(result.scores.iter().map(|fold| opt(fold[g])));
            row
        }),
    )
}

/// `name,value` pairs.
pub fn key_value_csv(header: [&str; 2], rows: &[(String, f64)]) -> IoResult<Vec<u8>> {
    to_bytes(&header, rows.iter().map(|(k, v)| vec![k.clone(), num(*v)]))
}

/// Arbitrary table with numeric cells.
pub fn table_csv(header: &[&str], rows: &[(String, Vec<f64>)]) -> IoResult<Vec<u8>> {
    to_bytes(
        header,
        rows.iter().map(|(k, vals)| std::iter::once(k.clone()).chain(vals.iter().map(|v| num(*v))).collect()),
    )
}

pub fn write_report(path: &Path, bytes: &[u8]) -> IoResult<()> {
    write_atomic(path, bytes)
}
