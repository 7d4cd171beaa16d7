//! Running, sweeping, comparing and certifying experiments.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use proxdescent::baselines::{pgsg_with, ppm_with, subgradient_method_with, BaselineRecord};
use proxdescent::prox_descent::{run_with, Termination};
use proxdescent::stationarity::{is_to_ms_bound, moreau_reference_with, MoreauOptions};
use proxdescent::{Error, Point};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AlgorithmSpec, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::trace::{self, RunSummary, TraceRow};

/// Rows, iterates and summary of one run, before anything is written.
#[derive(Clone, Debug, PartialEq)]
pub struct RunData {
    pub rows: Vec<TraceRow>,
    /// The iterate of each row.
    pub points: Vec<Vec<f64>>,
    pub summary: RunSummary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub trace_path: PathBuf,
    pub data: RunData,
}

/// Runs `config` and writes its trace files.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome> {
    let data = execute(config)?;
    let trace_path = config.trace_path();
    trace::write_run(&trace_path, &data.rows, &data.points, &data.summary)?;
    Ok(RunOutcome { trace_path, data })
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn min_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    values.flatten().filter(|v| !v.is_nan()).reduce(f64::min)
}

/// Runs `config` in memory.
///
/// Row `k` of a prox descent trace holds `x_{k+1}` and `f(x_{k+1})`, with row 0
/// for `x_1`. Baseline row `k` holds `x_{k+1}` and the objective at the center
/// `x_k` that the step evaluated; the subgradient method adds a row `T + 1` for
/// its final evaluation.
pub fn execute(config: &ExperimentConfig) -> Result<RunData> {
    config.validate()?;
    let (problem, x1) = config.problem.build()?;
    let f = problem.oracle();
    let m = f.weak_convexity();
    let id = config.id.clone();
    let algorithm = config.algorithm_name().to_string();
    let row = |k: usize, evals: u64, f_value: f64, ms: f64| TraceRow {
        experiment_id: id.clone(),
        algorithm: algorithm.clone(),
        outer_index: k,
        cumulative_evaluations: evals,
        f_value,
        gtilde_norm_sq: None,
        epsilon: None,
        inner_count: None,
        stationarity_proxy: None,
        wall_time_ms: ms,
    };
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut points = Vec::new();

    let (termination, certified_index, evaluations, inner_iterations, rho) = match &config.algorithm
    {
        AlgorithmSpec::ProxDescent { rho, .. } => {
            let pd = config.prox_descent_config()?;
            let mut evals = 1u64;
            let f1 = f.evaluate(&x1)?.value;
            rows.push(row(0, evals, f1, elapsed_ms(start)));
            points.push(x1.clone().into_vec());
            let report = run_with(f, &x1, &pd, |step| {
                evals += step.evaluations;
                let k = rows.len();
                let g2 = step.gtilde_norm_sq();
                rows.push(TraceRow {
                    gtilde_norm_sq: Some(g2),
                    epsilon: Some(step.inexactness),
                    inner_count: Some(step.inner_iterations),
                    stationarity_proxy: Some((rho + m).powi(2) * step.step_norm_sq()),
                    ..row(k, evals, step.f_trial, elapsed_ms(start))
                });
                points.push(step.trial.as_slice().to_vec());
            })?;
            let termination = match report.termination {
                Termination::Certified { .. } => "certified",
                Termination::MaxOuter => "max_outer",
                Termination::InnerBudgetExhausted => "inner_budget_exhausted",
                Termination::EvaluationBudget => "evaluation_budget",
            };
            let inner = report.total_inner_iterations()
                + report.partial_inner.as_ref().map_or(0, |t| t.records.len());
            (
                termination,
                report.certified_index,
                report.evaluations,
                inner,
                *rho,
            )
        }
        AlgorithmSpec::Subgradient {
            schedule,
            iterations,
            proxy_rho,
        } => {
            let t = iterations.unwrap_or((config.budget - 1) as usize);
            let mut times = Vec::new();
            let report =
                subgradient_method_with(f, &x1, schedule, t, |_| times.push(elapsed_ms(start)))?;
            baseline_rows(
                &report.records,
                &report.points,
                &times,
                (proxy_rho + m).powi(2),
                &row,
                &mut rows,
                &mut points,
                None,
            );
            (
                "completed",
                None,
                report.evaluations,
                report.records.len(),
                *proxy_rho,
            )
        }
        AlgorithmSpec::Ppm {
            alpha,
            iterations,
            inner_tol,
        } => {
            let mut times = Vec::new();
            let report = ppm_with(f, &x1, *alpha, *iterations, *inner_tol, |_| {
                times.push(elapsed_ms(start))
            })?;
            let kept = baseline_rows(
                &report.records,
                &report.points,
                &times,
                alpha * alpha,
                &row,
                &mut rows,
                &mut points,
                Some(config.budget),
            );
            let termination = if kept < report.records.len() {
                "evaluation_budget"
            } else {
                "completed"
            };
            let evaluations = rows.last().map_or(0, |r| r.cumulative_evaluations);
            (
                termination,
                None,
                evaluations,
                report.evaluations as usize,
                alpha - m,
            )
        }
        AlgorithmSpec::Pgsg {
            rho,
            outer,
            inner,
            ascent_sign,
        } => {
            let t = outer.unwrap_or((config.budget / *inner as u64) as usize);
            let mut times = Vec::new();
            let report = pgsg_with(f, &x1, *rho, t, *inner, *ascent_sign, |_| {
                times.push(elapsed_ms(start))
            })?;
            baseline_rows(
                &report.records,
                &report.points,
                &times,
                (rho + m).powi(2),
                &row,
                &mut rows,
                &mut points,
                None,
            );
            (
                "completed",
                None,
                report.evaluations,
                report.evaluations as usize,
                *rho,
            )
        }
    };

    let summary = RunSummary {
        experiment_id: config.id.clone(),
        algorithm,
        termination: termination.to_string(),
        certified_index,
        evaluations,
        outer_iterations: rows.iter().filter(|r| r.outer_index > 0).count(),
        inner_iterations,
        m,
        rho,
        final_f: rows.last().map_or(f64::NAN, |r| r.f_value),
        min_gtilde_norm_sq: min_of(rows.iter().map(|r| r.gtilde_norm_sq)),
        min_epsilon: min_of(rows.iter().map(|r| r.epsilon)),
        min_stationarity_proxy: min_of(rows.iter().map(|r| r.stationarity_proxy)),
    };
    Ok(RunData {
        rows,
        points,
        summary,
    })
}

/// Appends baseline rows, stopping before the first that exceeds `budget`.
/// Returns the number of records kept.
#[allow(clippy::too_many_arguments)]
fn baseline_rows(
    records: &[BaselineRecord],
    iterates: &[Point],
    times: &[f64],
    proxy_scale: f64,
    row: &dyn Fn(usize, u64, f64, f64) -> TraceRow,
    rows: &mut Vec<TraceRow>,
    points: &mut Vec<Vec<f64>>,
    budget: Option<u64>,
) -> usize {
    let mut previous = 0;
    for (i, r) in records.iter().enumerate() {
        if budget.is_some_and(|b| r.evaluations > b) {
            return i;
        }
        let step = r.step_norm_sq;
        rows.push(TraceRow {
            inner_count: Some((r.evaluations - previous) as usize),
            stationarity_proxy: (!step.is_nan()).then_some(proxy_scale * step),
            ..row(r.k, r.evaluations, r.f_value, times[i])
        });
        let next = iterates
            .get(r.k)
            .unwrap_or_else(|| iterates.last().expect("x_1 is stored"));
        points.push(next.as_slice().to_vec());
        previous = r.evaluations;
    }
    records.len()
}

/// One cell of a parameter sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub experiment_id: String,
    pub beta: f64,
    pub rho: f64,
    pub termination: String,
    pub evaluations: u64,
    pub final_gtilde_norm_sq: Option<f64>,
    pub final_epsilon: Option<f64>,
    pub min_gtilde_norm_sq: Option<f64>,
    pub min_epsilon: Option<f64>,
    pub trace: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub cells: Vec<SweepCell>,
    pub summary_path: PathBuf,
}

fn format_param(v: f64) -> String {
    format!("{v}").replace('.', "p").replace('-', "m")
}

/// Runs prox descent on the `beta x rho` grid in parallel and writes a summary CSV.
pub fn sweep(base: &ExperimentConfig, betas: &[f64], rhos: &[f64]) -> Result<SweepOutcome> {
    if !matches!(base.algorithm, AlgorithmSpec::ProxDescent { .. }) {
        return Err(HarnessError::Config(
            "sweep needs a prox_descent config".into(),
        ));
    }
    if betas.is_empty() || rhos.is_empty() {
        return Err(HarnessError::Config("sweep grid is empty".into()));
    }
    let grid: Vec<(f64, f64)> = betas
        .iter()
        .flat_map(|&b| rhos.iter().map(move |&r| (b, r)))
        .collect();
    let configs = grid
        .iter()
        .map(|&(b, r)| {
            let mut c = base.clone();
            c.id = format!("{}_beta{}_rho{}", base.id, format_param(b), format_param(r));
            c.output.trace = None;
            if let AlgorithmSpec::ProxDescent { beta, rho, .. } = &mut c.algorithm {
                *beta = b;
                *rho = r;
            }
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let outcomes = configs
        .par_iter()
        .map(run_experiment)
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<SweepCell> = grid
        .iter()
        .zip(&outcomes)
        .map(|(&(beta, rho), o)| {
            let last = o.data.rows.last();
            SweepCell {
                experiment_id: o.data.summary.experiment_id.clone(),
                beta,
                rho,
                termination: o.data.summary.termination.clone(),
                evaluations: o.data.summary.evaluations,
                final_gtilde_norm_sq: last.and_then(|r| r.gtilde_norm_sq),
                final_epsilon: last.and_then(|r| r.epsilon),
                min_gtilde_norm_sq: o.data.summary.min_gtilde_norm_sq,
                min_epsilon: o.data.summary.min_epsilon,
                trace: o.trace_path.clone(),
            }
        })
        .collect();
    let summary_path = base.output_dir().join(format!("{}_sweep.csv", base.id));
    let mut w = csv::Writer::from_path(&summary_path)?;
    for cell in &cells {
        w.serialize(cell)?;
    }
    w.flush().map_err(|e| HarnessError::io(&summary_path, e))?;
    Ok(SweepOutcome {
        cells,
        summary_path,
    })
}

/// A row of a comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub algorithm: String,
    pub outer_iterations: usize,
    /// Fixed `J` for PGSG; `None` when the inner loop length is adaptive.
    pub inner_per_outer: Option<usize>,
    pub inner_iterations: usize,
    pub total_evaluations: u64,
    /// `min_k (rho + m)^2 |x_{k+1} - x_k|^2`.
    pub stationarity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<14}", "")?;
        for r in &self.rows {
            write!(f, "{:>16}", r.algorithm)?;
        }
        writeln!(f)?;
        let line =
            |f: &mut fmt::Formatter<'_>, name: &str, cell: &dyn Fn(&ComparisonRow) -> String| {
                write!(f, "{name:<14}")?;
                for r in &self.rows {
                    write!(f, "{:>16}", cell(r))?;
                }
                writeln!(f)
            };
        line(f, "Outer Iter.", &|r| r.outer_iterations.to_string())?;
        line(f, "Inner Iter.", &|r| {
            r.inner_per_outer
                .map_or("dynamic".into(), |j| j.to_string())
        })?;
        line(f, "Total Iter.", &|r| r.total_evaluations.to_string())?;
        line(f, "Stationarity", &|r| format!("{:.3e}", r.stationarity))
    }
}

/// Runs each PGSG split `(T, J)` and the config's prox descent on the same problem and budget.
pub fn compare(
    config: &ExperimentConfig,
    splits: &[(usize, usize)],
    pgsg_rho: Option<f64>,
) -> Result<ComparisonTable> {
    let AlgorithmSpec::ProxDescent { rho, .. } = config.algorithm else {
        return Err(HarnessError::Config(
            "compare needs a prox_descent config".into(),
        ));
    };
    let mut configs = Vec::with_capacity(splits.len() + 1);
    for &(t, j) in splits {
        if t < 1 || j < 1 || (t as u64).saturating_mul(j as u64) > config.budget {
            return Err(HarnessError::InfeasibleSplit {
                outer: t,
                inner: j,
                budget: config.budget,
            });
        }
        let mut c = config.clone();
        c.id = format!("{}_pgsg_{t}x{j}", config.id);
        c.algorithm = AlgorithmSpec::Pgsg {
            rho: pgsg_rho.unwrap_or(rho),
            outer: Some(t),
            inner: j,
            ascent_sign: false,
        };
        configs.push(c);
    }
    configs.push(config.clone());
    let runs = configs
        .par_iter()
        .map(execute)
        .collect::<Result<Vec<_>>>()?;
    let rows = runs
        .iter()
        .zip(&configs)
        .map(|(run, c)| {
            let s = &run.summary;
            let (label, inner_per_outer) = match c.algorithm {
                AlgorithmSpec::Pgsg { outer, inner, .. } => {
                    (format!("pgsg({},{inner})", outer.unwrap_or(0)), Some(inner))
                }
                _ => ("prox_descent".to_string(), None),
            };
            ComparisonRow {
                algorithm: label,
                outer_iterations: s.outer_iterations,
                inner_per_outer,
                inner_iterations: s.inner_iterations,
                total_evaluations: s.evaluations,
                stationarity: s.min_stationarity_proxy.unwrap_or(f64::INFINITY),
            }
        })
        .collect();
    Ok(ComparisonTable { rows })
}

/// Writes a comparison table as CSV.
pub fn write_comparison(path: &Path, table: &ComparisonTable) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in &table.rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Settings of [`certify`].
#[derive(Clone, Debug, PartialEq)]
pub struct CertifyOptions {
    /// Iterates to check besides the certified and the final one.
    pub max_checks: usize,
    pub reference: MoreauOptions,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            max_checks: 10,
            reference: MoreauOptions {
                max_iter: 20_000,
                ..Default::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub outer_index: usize,
    pub eta: f64,
    pub epsilon: f64,
    /// Reference `|grad f_{m + rho}|` at the iterate.
    pub moreau_grad_norm: f64,
    /// Bound implied by `(eta, epsilon)`.
    pub bound: f64,
    /// Worst-case error of `moreau_grad_norm` from the reference gap.
    pub solver_error: f64,
    pub reference_gap: f64,
    /// `f(x) - f_{m + rho}(x)`, over-estimated by at most `reference_gap`.
    pub proximal_gap: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub experiment_id: String,
    pub certified_index: Option<usize>,
    pub m: f64,
    pub rho: f64,
    pub checks: Vec<CertificateCheck>,
}

impl CertificateReport {
    pub fn all_satisfied(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }
}

impl fmt::Display for CertificateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "experiment {} (m = {}, rho = {})",
            self.experiment_id, self.m, self.rho
        )?;
        match self.certified_index {
            Some(k) => writeln!(f, "certified at outer index {k}")?,
            None => writeln!(f, "no certified iterate")?,
        }
        writeln!(
            f,
            "{:>8} {:>12} {:>12} {:>12} {:>12} {:>12} {:>6}",
            "k", "eta", "eps", "|grad f_a|", "bound", "solver err", "ok"
        )?;
        for c in &self.checks {
            writeln!(
                f,
                "{:>8} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>6}",
                c.outer_index,
                c.eta,
                c.epsilon,
                c.moreau_grad_norm,
                c.bound,
                c.solver_error,
                c.satisfied
            )?;
        }
        Ok(())
    }
}

/// Recomputes reference envelope gradients at selected iterates of a prox descent
/// trace and checks them against the bound implied by each emitted `(eta, eps)`.
pub fn certify(
    trace_path: &Path,
    config: &ExperimentConfig,
    options: &CertifyOptions,
) -> Result<CertificateReport> {
    let rows = trace::read_rows(trace_path)?;
    if rows.is_empty() {
        return Err(HarnessError::EmptyTrace(trace_path.to_path_buf()));
    }
    let summary = trace::read_summary(trace_path)?;
    let points = trace::read_points(trace_path)?;
    let (problem, _) = config.problem.build()?;
    let f = problem.oracle();
    let m = f.weak_convexity();
    let rho = summary.rho;
    let alpha = m + rho;

    let candidates: Vec<&TraceRow> = rows
        .iter()
        .filter(|r| r.gtilde_norm_sq.is_some() && r.epsilon.is_some())
        .collect();
    if candidates.is_empty() {
        return Err(HarnessError::MissingIterate(
            "no rows carry (eta, epsilon) pairs".into(),
        ));
    }
    let stride = candidates.len().div_ceil(options.max_checks.max(1));
    let mut selected: Vec<usize> = candidates
        .iter()
        .step_by(stride)
        .map(|r| r.outer_index)
        .collect();
    selected.extend(summary.certified_index);
    selected.push(candidates.last().expect("non-empty").outer_index);
    selected.sort_unstable();
    selected.dedup();

    let mut checks = Vec::with_capacity(selected.len());
    for k in selected {
        let row = candidates
            .iter()
            .find(|r| r.outer_index == k)
            .ok_or_else(|| HarnessError::MissingIterate(format!("outer index {k}")))?;
        let x = points
            .iter()
            .find(|(i, _)| *i == k)
            .ok_or_else(|| HarnessError::MissingIterate(format!("point for outer index {k}")))?;
        let x = Point::from_slice(&x.1)?;
        let reference = match moreau_reference_with(f, &x, alpha, &options.reference) {
            Ok(r) => r,
            Err(Error::ReferenceBudgetExhausted { partial, .. }) => *partial,
            Err(e) => return Err(e.into()),
        };
        let eta = row.gtilde_norm_sq.unwrap_or(0.0).sqrt();
        let epsilon = row.epsilon.unwrap_or(0.0);
        let bound = is_to_ms_bound(eta, epsilon.max(0.0), m, rho)?;
        let solver_error = alpha * reference.prox_point_error_bound(alpha, m);
        let grad = reference.gradient.norm();
        checks.push(CertificateCheck {
            outer_index: k,
            eta,
            epsilon,
            moreau_grad_norm: grad,
            bound,
            solver_error,
            reference_gap: reference.certified_gap,
            proximal_gap: (reference.f_x - reference.lower_bound).max(0.0),
            satisfied: grad <= bound + solver_error + 1e-12 * (1.0 + bound),
        });
    }
    Ok(CertificateReport {
        experiment_id: summary.experiment_id,
        certified_index: summary.certified_index,
        m,
        rho,
        checks,
    })
}
