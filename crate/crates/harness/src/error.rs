use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("could not parse config: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("split T = {outer}, J = {inner} needs {} evaluations, budget is {budget}", *outer as u64 * *inner as u64)]
    InfeasibleSplit {
        outer: usize,
        inner: usize,
        budget: u64,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("trace error: {0}")]
    Csv(#[from] csv::Error),

    #[error("trace {} has no rows", .0.display())]
    EmptyTrace(PathBuf),

    #[error("trace is missing data: {0}")]
    MissingIterate(String),

    #[error("inner loop at outer step {outer_index} exhausted its budget of {budget} iterations")]
    InnerBudgetExhausted { outer_index: usize, budget: usize },

    #[error(transparent)]
    Solver(#[from] proxdescent::Error),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
