//! CSV traces and their sidecar files.
//!
//! A run writes three files next to each other:
//! `<stem>.csv` with one [`TraceRow`] per outer step, `<stem>.points.csv` with
//! the iterate of each row, and `<stem>.summary.json` with a [`RunSummary`].

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const TRACE_HEADER: &str = "experiment_id,algorithm,outer_index,cumulative_evaluations,f_value,gtilde_norm_sq,epsilon,inner_count,stationarity_proxy,wall_time_ms";

/// One outer step. Empty fields mean the algorithm does not produce that quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub experiment_id: String,
    pub algorithm: String,
    pub outer_index: usize,
    pub cumulative_evaluations: u64,
    pub f_value: f64,
    pub gtilde_norm_sq: Option<f64>,
    pub epsilon: Option<f64>,
    pub inner_count: Option<usize>,
    /// `(rho + m)^2 |x_{k+1} - x_k|^2`.
    pub stationarity_proxy: Option<f64>,
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub experiment_id: String,
    pub algorithm: String,
    /// `certified`, `max_outer`, `inner_budget_exhausted`, `evaluation_budget` or `completed`.
    pub termination: String,
    /// Outer index of the row that met both targets.
    pub certified_index: Option<usize>,
    pub evaluations: u64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub m: f64,
    /// The `rho` of the stationarity proxy.
    pub rho: f64,
    pub final_f: f64,
    pub min_gtilde_norm_sq: Option<f64>,
    pub min_epsilon: Option<f64>,
    pub min_stationarity_proxy: Option<f64>,
}

impl RunSummary {
    pub fn inner_budget_exhausted(&self) -> bool {
        self.termination == "inner_budget_exhausted"
    }
}

pub fn points_path(trace: &Path) -> PathBuf {
    trace.with_extension("points.csv")
}

pub fn summary_path(trace: &Path) -> PathBuf {
    trace.with_extension("summary.json")
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    Ok(())
}

/// Writes the trace, the points file and the summary.
pub fn write_run(
    path: &Path,
    rows: &[TraceRow],
    points: &[Vec<f64>],
    summary: &RunSummary,
) -> Result<()> {
    assert_eq!(rows.len(), points.len(), "one point per row");
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(TRACE_HEADER.split(','))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;

    let pp = points_path(path);
    let mut w = csv::Writer::from_path(&pp)?;
    let dim = points.first().map_or(0, Vec::len);
    let mut header = vec!["outer_index".to_string()];
    header.extend((1..=dim).map(|i| format!("x_{i}")));
    w.write_record(&header)?;
    for (row, x) in rows.iter().zip(points) {
        let mut record = vec![row.outer_index.to_string()];
        record.extend(x.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| HarnessError::io(&pp, e))?;

    let sp = summary_path(path);
    let json = serde_json::to_string_pretty(summary).expect("summaries serialize");
    fs::write(&sp, json).map_err(|e| HarnessError::io(&sp, e))?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<TraceRow>> {
    let file = fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != TRACE_HEADER {
        return Err(HarnessError::MissingIterate(format!(
            "unexpected header {header:?}"
        )));
    }
    Ok(r.deserialize().collect::<Result<Vec<TraceRow>, _>>()?)
}

/// Points keyed by outer index.
pub fn read_points(trace: &Path) -> Result<Vec<(usize, Vec<f64>)>> {
    let pp = points_path(trace);
    let file = fs::File::open(&pp).map_err(|e| HarnessError::io(&pp, e))?;
    let mut r = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| {
                HarnessError::MissingIterate(format!("bad coordinate {s:?} in {}", pp.display()))
            })
        };
        let mut fields = record.iter();
        let k = fields
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| {
                HarnessError::MissingIterate(format!("bad outer index in {}", pp.display()))
            })?;
        out.push((k, fields.map(parse).collect::<Result<Vec<_>>>()?));
    }
    Ok(out)
}

pub fn read_summary(trace: &Path) -> Result<RunSummary> {
    let sp = summary_path(trace);
    let text = fs::read_to_string(&sp).map_err(|e| HarnessError::io(&sp, e))?;
    serde_json::from_str(&text)
        .map_err(|e| HarnessError::MissingIterate(format!("{}: {e}", sp.display())))
}

/// The trace with the timing column removed, for determinism checks.
pub fn strip_timing(csv_text: &str) -> String {
    csv_text
        .lines()
        .map(|line| line.rsplit_once(',').map_or(line, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: usize, evals: u64) -> TraceRow {
        TraceRow {
            experiment_id: "e".into(),
            algorithm: "prox_descent".into(),
            outer_index: k,
            cumulative_evaluations: evals,
            f_value: 1.5,
            gtilde_norm_sq: (k > 0).then_some(0.25),
            epsilon: None,
            inner_count: Some(3),
            stationarity_proxy: None,
            wall_time_ms: 0.125,
        }
    }

    fn summary() -> RunSummary {
        RunSummary {
            experiment_id: "e".into(),
            algorithm: "prox_descent".into(),
            termination: "max_outer".into(),
            certified_index: None,
            evaluations: 4,
            outer_iterations: 1,
            inner_iterations: 3,
            m: 0.0,
            rho: 1.0,
            final_f: 1.5,
            min_gtilde_norm_sq: Some(0.25),
            min_epsilon: None,
            min_stationarity_proxy: None,
        }
    }

    #[test]
    fn round_trips_with_fixed_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("e.csv");
        let rows = vec![row(0, 1), row(1, 4)];
        write_run(&path, &rows, &[vec![1.0, 2.0], vec![0.5, 0.25]], &summary()).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), TRACE_HEADER);
        assert!(text.lines().nth(1).unwrap().contains(",,"));
        assert_eq!(read_rows(&path).unwrap(), rows);
        assert_eq!(read_points(&path).unwrap()[1], (1, vec![0.5, 0.25]));
        assert_eq!(read_summary(&path).unwrap(), summary());
    }

    #[test]
    fn empty_trace_keeps_its_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        write_run(&path, &[], &[], &summary()).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().trim(), TRACE_HEADER);
        assert!(read_rows(&path).unwrap().is_empty());
    }

    #[test]
    fn strips_the_timing_column() {
        assert_eq!(strip_timing("a,b,c\n1,2,3.5\n"), "a,b\n1,2");
    }
}
