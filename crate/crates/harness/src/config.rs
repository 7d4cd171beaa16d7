//! Experiment configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use proxdescent::baselines::StepSchedule;
use proxdescent::problems::{
    gen_blind_deconv, gen_phase_retrieval, toy, BlindDeconvInstance, DeconvModulus,
    PhaseRetrievalInstance, ToyKind, ToyOracle,
};
use proxdescent::prox_descent::ProxDescentConfig;
use proxdescent::{Oracle, Point};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Overrides `output.dir` when set.
pub const OUT_DIR_ENV: &str = "PROXDESCENT_OUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub problem: ProblemSpec,
    pub algorithm: AlgorithmSpec,
    /// Total oracle evaluations.
    pub budget: u64,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    PhaseRetrieval {
        d: usize,
        n: usize,
        seed: u64,
        initial_point: Option<Vec<f64>>,
    },
    BlindDeconv {
        d: usize,
        n: usize,
        seed: u64,
        #[serde(default)]
        modulus: DeconvModulus,
        initial_point: Option<Vec<f64>>,
    },
    Toy {
        function: ToyKind,
        dim: usize,
        initial_point: Vec<f64>,
    },
    /// A phase retrieval instance saved as JSON.
    PhaseRetrievalFile {
        path: PathBuf,
        initial_point: Option<Vec<f64>>,
    },
    /// A blind deconvolution instance saved as JSON.
    BlindDeconvFile {
        path: PathBuf,
        initial_point: Option<Vec<f64>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    ProxDescent {
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "default_target")]
        eta_target: f64,
        #[serde(default = "default_target")]
        eps_target: f64,
        #[serde(default = "default_max_outer")]
        max_outer: usize,
        #[serde(default = "default_max_inner")]
        max_inner_per_step: usize,
    },
    Subgradient {
        schedule: StepSchedule,
        /// Updates to run; defaults to `budget - 1`.
        iterations: Option<usize>,
        /// `rho` of the `(rho + m)^2 |x_{k+1} - x_k|^2` proxy column.
        #[serde(default = "default_rho")]
        proxy_rho: f64,
    },
    Ppm {
        alpha: f64,
        iterations: usize,
        #[serde(default = "default_inner_tol")]
        inner_tol: f64,
    },
    Pgsg {
        rho: f64,
        /// Outer rounds `T`; defaults to `budget / inner`.
        outer: Option<usize>,
        /// Subgradient steps per round `J`.
        inner: usize,
        #[serde(default)]
        ascent_sign: bool,
    },
}

fn default_beta() -> f64 {
    0.5
}
fn default_rho() -> f64 {
    1.0
}
fn default_target() -> f64 {
    1e-6
}
fn default_max_outer() -> usize {
    1_000_000
}
fn default_max_inner() -> usize {
    100_000
}
fn default_inner_tol() -> f64 {
    1e-10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// File name of the trace inside `dir`; defaults to `<id>.csv`.
    pub trace: Option<String>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: PathBuf::from("out"),
            trace: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget < 1 {
            return Err(HarnessError::Config("budget must be at least 1".into()));
        }
        if self.id.is_empty() || self.id.contains(['/', '\\']) {
            return Err(HarnessError::Config(format!(
                "id {:?} is not a plain name",
                self.id
            )));
        }
        match &self.algorithm {
            AlgorithmSpec::ProxDescent { .. } => {
                self.prox_descent_config()?.validate()?;
            }
            AlgorithmSpec::Subgradient {
                schedule,
                iterations,
                proxy_rho,
            } => {
                schedule.validate()?;
                if iterations.is_some_and(|t| t as u64 + 1 > self.budget) {
                    return Err(HarnessError::Config(
                        "subgradient iterations + 1 exceed the budget".into(),
                    ));
                }
                positive("proxy_rho", *proxy_rho)?;
            }
            AlgorithmSpec::Ppm {
                alpha,
                iterations,
                inner_tol,
            } => {
                positive("alpha", *alpha)?;
                positive("inner_tol", *inner_tol)?;
                if *iterations < 1 {
                    return Err(HarnessError::Config(
                        "ppm needs at least one iteration".into(),
                    ));
                }
            }
            AlgorithmSpec::Pgsg {
                rho, outer, inner, ..
            } => {
                positive("rho", *rho)?;
                if *inner < 1 {
                    return Err(HarnessError::Config("pgsg needs inner >= 1".into()));
                }
                let t = outer.unwrap_or((self.budget / *inner as u64) as usize);
                if t < 1 || (t as u64).saturating_mul(*inner as u64) > self.budget {
                    return Err(HarnessError::InfeasibleSplit {
                        outer: t,
                        inner: *inner,
                        budget: self.budget,
                    });
                }
            }
        }
        Ok(())
    }

    /// Solver settings for a prox descent run, with the budget as evaluation cap.
    pub fn prox_descent_config(&self) -> Result<ProxDescentConfig> {
        match self.algorithm {
            AlgorithmSpec::ProxDescent {
                beta,
                rho,
                eta_target,
                eps_target,
                max_outer,
                max_inner_per_step,
            } => Ok(ProxDescentConfig {
                beta,
                rho,
                eta_target,
                eps_target,
                max_outer,
                max_inner_per_step,
                max_evaluations: Some(self.budget),
                ..Default::default()
            }),
            _ => Err(HarnessError::Config("not a prox_descent config".into())),
        }
    }

    /// Output directory, honoring [`OUT_DIR_ENV`].
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output.dir.clone(),
        }
    }

    pub fn trace_path(&self) -> PathBuf {
        let name = self
            .output
            .trace
            .clone()
            .unwrap_or_else(|| format!("{}.csv", self.id));
        self.output_dir().join(name)
    }

    pub fn algorithm_name(&self) -> &'static str {
        match self.algorithm {
            AlgorithmSpec::ProxDescent { .. } => "prox_descent",
            AlgorithmSpec::Subgradient { .. } => "subgradient",
            AlgorithmSpec::Ppm { .. } => "ppm",
            AlgorithmSpec::Pgsg { .. } => "pgsg",
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(HarnessError::Config(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

/// A generated problem with its starting point.
pub enum Problem {
    PhaseRetrieval(PhaseRetrievalInstance),
    BlindDeconv(BlindDeconvInstance),
    Toy(ToyOracle),
}

impl Problem {
    pub fn oracle(&self) -> &dyn Oracle {
        match self {
            Problem::PhaseRetrieval(p) => p,
            Problem::BlindDeconv(p) => p,
            Problem::Toy(p) => p,
        }
    }
}

impl ProblemSpec {
    /// Builds the oracle and the initial point.
    pub fn build(&self) -> Result<(Problem, Point)> {
        let start = |given: &Option<Vec<f64>>, default: &Point| -> Result<Point> {
            Ok(match given {
                Some(v) => Point::from_slice(v)?,
                None => default.clone(),
            })
        };
        let (problem, x1) = match self {
            ProblemSpec::PhaseRetrieval {
                d,
                n,
                seed,
                initial_point,
            } => {
                let inst = gen_phase_retrieval(*d, *n, *seed)?;
                let x1 = start(initial_point, &inst.initial_point)?;
                (Problem::PhaseRetrieval(inst), x1)
            }
            ProblemSpec::BlindDeconv {
                d,
                n,
                seed,
                modulus,
                initial_point,
            } => {
                let inst = gen_blind_deconv(*d, *n, *seed, *modulus)?;
                let x1 = start(initial_point, &inst.initial_point)?;
                (Problem::BlindDeconv(inst), x1)
            }
            ProblemSpec::Toy {
                function,
                dim,
                initial_point,
            } => (
                Problem::Toy(toy(*function, *dim)?),
                Point::from_slice(initial_point)?,
            ),
            ProblemSpec::PhaseRetrievalFile {
                path,
                initial_point,
            } => {
                let inst = PhaseRetrievalInstance::load(path)?;
                let x1 = start(initial_point, &inst.initial_point)?;
                (Problem::PhaseRetrieval(inst), x1)
            }
            ProblemSpec::BlindDeconvFile {
                path,
                initial_point,
            } => {
                let inst = BlindDeconvInstance::load(path)?;
                let x1 = start(initial_point, &inst.initial_point)?;
                (Problem::BlindDeconv(inst), x1)
            }
        };
        if x1.dim() != problem.oracle().dim() {
            return Err(HarnessError::Config(format!(
                "initial point has dimension {}, problem has {}",
                x1.dim(),
                problem.oracle().dim()
            )));
        }
        Ok((problem, x1))
    }
}
