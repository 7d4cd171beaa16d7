//! The proximal descent method.
//!
//! Outer loop: `x_{k+1} = z_{k+1}`, the trial point accepted by the inner
//! loop at center `x_k`. Inner loop: proximal steps on the essential model of
//! `f(.) + (m/2)|. - x_k|^2` with proximal parameter `rho`, refining the model
//! by null steps until the descent test
//!
//! ```text
//! f(x_k) - (f(z) + (m/2)|z - x_k|^2) >= beta (f(x_k) - f~(z))
//! ```
//!
//! passes. With `alpha = m + rho` the accepted point carries the certificate
//! `g~ = alpha (x_k - z)`, `eps = f(z) + (m/2)|z - x_k|^2 - f~(z)`, meaning
//! `f(y) + (m/2)|y - z|^2 >= f(z) + <g~, y - z> - eps` for every `y`.

use serde::{Deserialize, Serialize};

use crate::bundle::{initial_cut_from, subgradient_cut_from, EssentialModel};
use crate::error::{invalid, Error, Result};
use crate::oracle::{check_dim, Evaluation, Oracle};
use crate::point::Point;

/// Relative tolerance on negative approximation gaps before the declared `m` is rejected.
const MINORANT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProxDescentConfig {
    pub beta: f64,
    pub rho: f64,
    pub eta_target: f64,
    pub eps_target: f64,
    pub max_outer: usize,
    pub max_inner_per_step: usize,
    pub descent_test_slack: f64,
    /// Total oracle calls allowed, counting the evaluation at `x_1`.
    pub max_evaluations: Option<u64>,
}

impl Default for ProxDescentConfig {
    fn default() -> Self {
        ProxDescentConfig {
            beta: 0.5,
            rho: 1.0,
            eta_target: 1e-6,
            eps_target: 1e-6,
            max_outer: 1000,
            max_inner_per_step: 100_000,
            descent_test_slack: 1e-12,
            max_evaluations: None,
        }
    }
}

impl ProxDescentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(invalid(
                "beta",
                format!("must lie in (0, 1), got {}", self.beta),
            ));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(invalid(
                "rho",
                format!("must be positive, got {}", self.rho),
            ));
        }
        if !(self.eta_target >= 0.0) {
            return Err(invalid("eta_target", "must be nonnegative"));
        }
        if !(self.eps_target >= 0.0) {
            return Err(invalid("eps_target", "must be nonnegative"));
        }
        if self.max_outer == 0 {
            return Err(invalid("max_outer", "must be positive"));
        }
        if self.max_inner_per_step == 0 {
            return Err(invalid("max_inner_per_step", "must be positive"));
        }
        if !(self.descent_test_slack >= 0.0) {
            return Err(invalid("descent_test_slack", "must be nonnegative"));
        }
        if self.max_evaluations == Some(0) {
            return Err(invalid("max_evaluations", "must be positive"));
        }
        Ok(())
    }

    pub fn alpha(&self, m: f64) -> f64 {
        m + self.rho
    }
}

/// The descent test with an absolute slack of `slack * max(1, |f_center|)`.
pub fn descent_test(
    f_center: f64,
    f_trial_convexified: f64,
    model_value_at_trial: f64,
    beta: f64,
    slack: f64,
) -> bool {
    f_center - f_trial_convexified
        >= beta * (f_center - model_value_at_trial) - slack * f_center.abs().max(1.0)
}

/// One proximal step `j` of an inner loop and the evaluation at its minimizer `z_{j+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerRecord {
    pub j: usize,
    /// Optimal value `eta_j` of the model subproblem.
    pub eta: f64,
    pub theta: f64,
    /// `|s_j - g_j|^2` for the model that produced the step.
    pub slope_diff_sq: f64,
    /// `f~_j(z_{j+1})`.
    pub model_value: f64,
    /// `f(z_{j+1}) + (m/2)|z_{j+1} - x_k|^2`.
    pub trial_value: f64,
    /// Approximation gap `trial_value - model_value`.
    pub gap: f64,
    pub step_norm_sq: f64,
    /// `|s_{j+1}| = rho |x_k - z_{j+1}|`.
    pub aggregate_slope_norm: f64,
    /// `|g_{j+1}|`, the slope of the cut at `z_{j+1}`.
    pub cut_slope_norm: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerLoopTrace {
    pub center: Point,
    pub f_center: f64,
    /// `|g_1|`, the subgradient norm at the center.
    pub initial_slope_norm: f64,
    pub records: Vec<InnerRecord>,
}

impl InnerLoopTrace {
    /// Largest slope norm among all cuts built in this loop.
    pub fn max_slope_norm(&self) -> f64 {
        self.records
            .iter()
            .flat_map(|r| [r.cut_slope_norm, r.aggregate_slope_norm])
            .fold(self.initial_slope_norm, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescentStepResult {
    pub center: Point,
    pub f_center: f64,
    pub trial: Point,
    pub f_trial: f64,
    /// The subgradient of `f` returned at the trial point.
    pub trial_subgradient: Point,
    /// `alpha (x_k - z)`.
    pub gtilde: Point,
    /// `f(z) + (m/2)|z - x_k|^2 - f~(z)`, unclamped; nonnegative up to rounding.
    pub inexactness: f64,
    pub inner_iterations: usize,
    pub trace: InnerLoopTrace,
    /// Oracle calls made by this step.
    pub evaluations: u64,
}

impl DescentStepResult {
    pub fn gtilde_norm_sq(&self) -> f64 {
        self.gtilde.norm_sq()
    }

    pub fn step_norm_sq(&self) -> f64 {
        self.trial.dist_sq(&self.center)
    }

    pub fn max_slope_norm(&self) -> f64 {
        self.trace.max_slope_norm()
    }

    /// `eta` at the accepted proximal step.
    pub fn final_eta(&self) -> f64 {
        self.trace.records.last().map_or(f64::NAN, |r| r.eta)
    }
}

/// Runs one inner loop from `center`, evaluating the oracle there first.
pub fn prox_descent_step<O: Oracle + ?Sized>(
    oracle: &O,
    center: &Point,
    config: &ProxDescentConfig,
) -> Result<DescentStepResult> {
    config.validate()?;
    check_dim(oracle.dim(), center.dim())?;
    let eval = oracle.evaluate(center)?;
    let budget = config.max_evaluations.map(|b| b.saturating_sub(1));
    let mut step = descent_step_from(oracle, center, eval, config, budget)?;
    step.evaluations += 1;
    Ok(step)
}

/// Inner loop from a center whose evaluation is already known.
/// `budget` caps the oracle calls of this loop.
#[allow(clippy::explicit_counter_loop)]
fn descent_step_from<O: Oracle + ?Sized>(
    oracle: &O,
    center: &Point,
    center_eval: Evaluation,
    config: &ProxDescentConfig,
    budget: Option<u64>,
) -> Result<DescentStepResult> {
    let m = oracle.weak_convexity();
    let rho = config.rho;
    let alpha = config.alpha(m);
    let f_center = center_eval.value;
    let mut trace = InnerLoopTrace {
        center: center.clone(),
        f_center,
        initial_slope_norm: center_eval.subgradient.norm(),
        records: Vec::new(),
    };
    let mut model = EssentialModel::new(
        center.clone(),
        rho,
        m,
        initial_cut_from(center, center_eval),
    )?;
    let mut evaluations = 0u64;

    for j in 1..=config.max_inner_per_step {
        let step = model.prox_step()?;
        if budget.is_some_and(|b| evaluations >= b) {
            return Err(Error::EvaluationBudgetExhausted {
                budget: config.max_evaluations.unwrap_or(0),
                partial: Box::new(trace),
            });
        }
        let z = step.minimizer.clone();
        let eval = oracle.evaluate(&z)?;
        evaluations += 1;
        let cut = subgradient_cut_from(&z, &eval, center, m);
        let trial_value = cut.anchor_value;
        let gap = trial_value - step.model_value;
        let scale = 1f64.max(trial_value.abs()).max(step.model_value.abs());
        if gap < -MINORANT_TOL * scale {
            return Err(Error::ModelNotMinorant {
                m,
                gap,
                center: center.clone(),
                point: z,
            });
        }
        let accepted = descent_test(
            f_center,
            trial_value,
            step.model_value,
            config.beta,
            config.descent_test_slack,
        );
        trace.records.push(InnerRecord {
            j,
            eta: step.optimal_value,
            theta: step.theta,
            slope_diff_sq: step.slope_diff_sq,
            model_value: step.model_value,
            trial_value,
            gap,
            step_norm_sq: z.dist_sq(center),
            aggregate_slope_norm: step.aggregate_slope.norm(),
            cut_slope_norm: cut.slope.norm(),
            accepted,
        });
        if accepted {
            return Ok(DescentStepResult {
                center: center.clone(),
                f_center,
                gtilde: center.sub(&z).scale(alpha),
                trial: z,
                f_trial: eval.value,
                trial_subgradient: eval.subgradient,
                inexactness: gap,
                inner_iterations: j,
                trace,
                evaluations,
            });
        }
        model.update(&step, cut)?;
    }
    Err(Error::InnerBudgetExhausted {
        budget: config.max_inner_per_step,
        partial: Box::new(trace),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    /// `|g~| <= eta` and `eps <= eps_target` held at the same outer step.
    Certified {
        eta: f64,
        eps: f64,
    },
    MaxOuter,
    InnerBudgetExhausted,
    EvaluationBudget,
}

/// Outer step `k`, producing `x_{k+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub k: usize,
    /// `x_{k+1}`.
    pub point: Point,
    /// `f(x_{k+1})`.
    pub f_value: f64,
    /// `f(x_k)`.
    pub f_center: f64,
    pub gtilde_norm_sq: f64,
    pub inexactness: f64,
    pub inner_iterations: usize,
    /// Oracle calls so far, including the one at `x_1`.
    pub evaluations: u64,
    /// `|x_{k+1} - x_k|^2`.
    pub step_norm_sq: f64,
    pub max_slope_norm: f64,
    /// Model value `eta` at the accepted step.
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub x1: Point,
    pub f_initial: f64,
    pub m: f64,
    pub rho: f64,
    pub beta: f64,
    pub alpha: f64,
    pub iterates: Vec<OuterRecord>,
    pub termination: Termination,
    /// The outer index `k` whose output `x_{k+1}` was certified.
    pub certified_index: Option<usize>,
    pub final_point: Point,
    pub final_value: f64,
    pub evaluations: u64,
    pub best_gtilde_norm_sq: f64,
    pub best_inexactness: f64,
    /// The unfinished inner loop when a budget ran out.
    pub partial_inner: Option<InnerLoopTrace>,
}

impl SolveReport {
    pub fn total_inner_iterations(&self) -> usize {
        self.iterates.iter().map(|r| r.inner_iterations).sum()
    }

    /// The certified output point, if any.
    pub fn certified_point(&self) -> Option<&Point> {
        self.certified_index.map(|k| &self.iterates[k - 1].point)
    }
}

pub fn run<O: Oracle + ?Sized>(
    oracle: &O,
    x1: &Point,
    config: &ProxDescentConfig,
) -> Result<SolveReport> {
    run_with(oracle, x1, config, |_| {})
}

/// [`run`] with a callback receiving every accepted descent step.
pub fn run_with<O: Oracle + ?Sized>(
    oracle: &O,
    x1: &Point,
    config: &ProxDescentConfig,
    mut observer: impl FnMut(&DescentStepResult),
) -> Result<SolveReport> {
    config.validate()?;
    check_dim(oracle.dim(), x1.dim())?;
    let m = oracle.weak_convexity();
    if !(m >= 0.0 && m.is_finite()) {
        return Err(invalid("m", format!("oracle declares m = {m}")));
    }
    let first = oracle.evaluate(x1)?;
    let mut report = SolveReport {
        x1: x1.clone(),
        f_initial: first.value,
        m,
        rho: config.rho,
        beta: config.beta,
        alpha: config.alpha(m),
        iterates: Vec::new(),
        termination: Termination::MaxOuter,
        certified_index: None,
        final_point: x1.clone(),
        final_value: first.value,
        evaluations: 1,
        best_gtilde_norm_sq: f64::INFINITY,
        best_inexactness: f64::INFINITY,
        partial_inner: None,
    };
    let mut center = x1.clone();
    let mut center_eval = first;

    for k in 1..=config.max_outer {
        let budget = config
            .max_evaluations
            .map(|b| b.saturating_sub(report.evaluations));
        let step = match descent_step_from(oracle, &center, center_eval, config, budget) {
            Ok(step) => step,
            Err(Error::InnerBudgetExhausted { partial, .. }) => {
                report.evaluations += partial.records.len() as u64;
                report.termination = Termination::InnerBudgetExhausted;
                report.partial_inner = Some(*partial);
                return Ok(report);
            }
            Err(Error::EvaluationBudgetExhausted { partial, .. }) => {
                report.evaluations += partial.records.len() as u64;
                report.termination = Termination::EvaluationBudget;
                report.partial_inner = Some(*partial);
                return Ok(report);
            }
            Err(e) => return Err(e),
        };
        report.evaluations += step.evaluations;
        let gtilde_norm_sq = step.gtilde_norm_sq();
        report.iterates.push(OuterRecord {
            k,
            point: step.trial.clone(),
            f_value: step.f_trial,
            f_center: step.f_center,
            gtilde_norm_sq,
            inexactness: step.inexactness,
            inner_iterations: step.inner_iterations,
            evaluations: report.evaluations,
            step_norm_sq: step.step_norm_sq(),
            max_slope_norm: step.max_slope_norm(),
            eta: step.final_eta(),
        });
        report.best_gtilde_norm_sq = report.best_gtilde_norm_sq.min(gtilde_norm_sq);
        report.best_inexactness = report.best_inexactness.min(step.inexactness);
        report.final_point = step.trial.clone();
        report.final_value = step.f_trial;
        observer(&step);

        if gtilde_norm_sq.sqrt() <= config.eta_target && step.inexactness <= config.eps_target {
            report.termination = Termination::Certified {
                eta: gtilde_norm_sq.sqrt(),
                eps: step.inexactness,
            };
            report.certified_index = Some(k);
            return Ok(report);
        }
        center = step.trial;
        center_eval = Evaluation {
            value: step.f_trial,
            subgradient: step.trial_subgradient,
        };
    }
    Ok(report)
}
