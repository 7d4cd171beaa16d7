//! Experiment harness for the proximal descent solver: TOML configs, CSV
//! traces, parameter sweeps, method comparisons and certificate checks.

pub mod config;
pub mod error;
pub mod experiment;
pub mod trace;

pub use config::{AlgorithmSpec, ExperimentConfig, ProblemSpec, OUT_DIR_ENV};
pub use error::{HarnessError, Result};
pub use experiment::{
    certify, compare, execute, run_experiment, sweep, CertificateReport, CertifyOptions,
    ComparisonTable, RunData, RunOutcome, SweepOutcome,
};
pub use trace::{RunSummary, TraceRow, TRACE_HEADER};
