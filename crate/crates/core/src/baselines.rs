//! Baseline solvers: subgradient method, proximal point method, and a
//! deterministic proximally guided subgradient method (PGSG).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::oracle::{check_dim, Oracle};
use crate::point::Point;
use crate::stationarity::moreau_reference;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant {
        value: f64,
    },
    /// `sqrt(delta / (m L^2 (T + 1)))` for a horizon `T`.
    HorizonConstant {
        delta: f64,
        m: f64,
        lipschitz: f64,
        horizon: usize,
    },
    /// `2 / (mu (j + 2 + 36 / (gamma^4 mu^4 (j + 1))))`, `j = 0, 1, ...`
    Pgsg {
        mu: f64,
        gamma: f64,
    },
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::Constant { value } => value > 0.0 && value.is_finite(),
            StepSchedule::HorizonConstant {
                delta,
                m,
                lipschitz,
                ..
            } => delta > 0.0 && m > 0.0 && lipschitz > 0.0 && self.step(0).is_finite(),
            StepSchedule::Pgsg { mu, gamma } => mu > 0.0 && gamma > 0.0 && self.step(0) > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(
                "schedule",
                format!("{self:?} does not give positive finite steps"),
            ))
        }
    }

    pub fn step(&self, j: usize) -> f64 {
        match *self {
            StepSchedule::Constant { value } => value,
            StepSchedule::HorizonConstant {
                delta,
                m,
                lipschitz,
                horizon,
            } => (delta / (m * lipschitz * lipschitz * (horizon as f64 + 1.0))).sqrt(),
            StepSchedule::Pgsg { mu, gamma } => {
                let j = j as f64;
                let gm = gamma * mu;
                2.0 / (mu * (j + 2.0 + 36.0 / (gm.powi(4) * (j + 1.0))))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    /// Outer index `k` of `x_k`.
    pub k: usize,
    /// `f(x_k)`.
    pub f_value: f64,
    /// `|x_{k+1} - x_k|^2`.
    pub step_norm_sq: f64,
    /// `|grad f_alpha(x_k)|^2`, for the proximal point method.
    pub moreau_grad_norm_sq: Option<f64>,
    /// Oracle calls made up to and including the work of step `k`.
    pub evaluations: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineTermination {
    Completed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineReport {
    pub records: Vec<BaselineRecord>,
    /// `x_1, ..., x_{T+1}`.
    pub points: Vec<Point>,
    pub evaluations: u64,
    pub termination: BaselineTermination,
}

impl BaselineReport {
    pub fn final_point(&self) -> &Point {
        self.points.last().expect("reports hold at least x_1")
    }

    /// `min_k scale * |x_{k+1} - x_k|^2`.
    pub fn min_step_proxy(&self, scale: f64) -> f64 {
        self.records
            .iter()
            .map(|r| scale * r.step_norm_sq)
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_start<O: Oracle + ?Sized>(oracle: &O, x1: &Point, t: usize) -> Result<()> {
    check_dim(oracle.dim(), x1.dim())?;
    if t < 1 {
        return Err(invalid("T", "need at least one iteration"));
    }
    Ok(())
}

/// `x_{k+1} = x_k - alpha_k g_k` for `k = 1..T`, then one evaluation at `x_{T+1}`.
pub fn subgradient_method<O: Oracle + ?Sized>(
    oracle: &O,
    x1: &Point,
    schedule: &StepSchedule,
    t: usize,
) -> Result<BaselineReport> {
    subgradient_method_with(oracle, x1, schedule, t, |_| {})
}

/// [`subgradient_method`] with a callback receiving each record as it is produced.
pub fn subgradient_method_with<O: Oracle + ?Sized>(
    oracle: &O,
    x1: &Point,
    schedule: &StepSchedule,
    t: usize,
    mut observer: impl FnMut(&BaselineRecord),
) -> Result<BaselineReport> {
    check_start(oracle, x1, t)?;
    schedule.validate()?;
    let mut x = x1.clone();
    let mut records = Vec::with_capacity(t);
    let mut points = vec![x.clone()];
    let mut evaluations = 0;
    for k in 1..=t {
        let e = oracle.evaluate(&x)?;
        evaluations += 1;
        let next = x.add_scaled(-schedule.step(k - 1), &e.subgradient);
        records.push(BaselineRecord {
            k,
            f_value: e.value,
            step_norm_sq: next.dist_sq(&x),
            moreau_grad_norm_sq: None,
            evaluations,
        });
        observer(records.last().expect("just pushed"));
        points.push(next.clone());
        x = next;
    }
    let last = oracle.evaluate(&x)?;
    evaluations += 1;
    records.push(BaselineRecord {
        k: t + 1,
        f_value: last.value,
        step_norm_sq: f64::NAN,
        moreau_grad_norm_sq: None,
        evaluations,
    });
    observer(records.last().expect("just pushed"));
    Ok(BaselineReport {
        records,
        points,
        evaluations,
        termination: BaselineTermination::Completed,
    })
}

/// `x_{k+1} = argmin_y f(y) + (alpha/2)|y - x_k|^2`, each solved by the reference
/// solver to an objective gap of `inner_tol`.
pub fn ppm<O: Oracle + ?Sized>(
    oracle: &O,
    x1: &Point,
    alpha: f64,
    t: usize,
    inner_tol: f64,
) -> Result<BaselineReport> {
    ppm_with(oracle, x1, alpha, t, inner_tol, |_| {})
}

/// [`ppm`] with a callback receiving each record as it is produced.
pub fn ppm_with<O: Oracle + ?Sized>(
    oracle: &O,
    x1: &Point,
    alpha: f64,
    t: usize,
    inner_tol: f64,
    mut observer: impl FnMut(&BaselineRecord),
) -> Result<BaselineReport> {
    check_start(oracle, x1, t)?;
    let m = oracle.weak_convexity();
    if !(alpha > m) {
        return Err(invalid(
            "alpha",
            format!("must exceed m = {m}, got {alpha}"),
        ));
    }
    let mut x = x1.clone();
    let mut records = Vec::with_capacity(t);
    let mut points = vec![x.clone()];
    let mut evaluations = 0;
    for k in 1..=t {
        let r = moreau_reference(oracle, &x, alpha, inner_tol)?;
        evaluations += r.evaluations;
        records.push(BaselineRecord {
            k,
            f_value: r.f_x,
            step_norm_sq: r.prox_point.dist_sq(&x),
            moreau_grad_norm_sq: Some(r.gradient.norm_sq()),
            evaluations,
        });
        observer(records.last().expect("just pushed"));
        points.push(r.prox_point.clone());
        x = r.prox_point;
    }
    Ok(BaselineReport {
        records,
        points,
        evaluations,
        termination: BaselineTermination::Completed,
    })
}

/// `T` rounds of `J` subgradient steps on `f(.) + (rho/2)|. - x_k|^2` with the PGSG
/// schedule (`mu = rho`, `gamma = 1/(rho + m)`), restarted at `j = 0` every round.
///
/// The update is `y <- y - alpha_j v`. With `ascent_sign` it is `y <- y + alpha_j v`,
/// which ascends the subproblem; it is kept only for comparison.
pub fn pgsg<O: Oracle + ?Sized>(
    oracle: &O,
    x1: &Point,
    rho: f64,
    t: usize,
    j_inner: usize,
    ascent_sign: bool,
) -> Result<BaselineReport> {
    pgsg_with(oracle, x1, rho, t, j_inner, ascent_sign, |_| {})
}

/// [`pgsg`] with a callback receiving each record as it is produced.
pub fn pgsg_with<O: Oracle + ?Sized>(
    oracle: &O,
    x1: &Point,
    rho: f64,
    t: usize,
    j_inner: usize,
    ascent_sign: bool,
    mut observer: impl FnMut(&BaselineRecord),
) -> Result<BaselineReport> {
    check_start(oracle, x1, t)?;
    if !(rho > 0.0) {
        return Err(invalid("rho", "must be positive"));
    }
    if j_inner < 1 {
        return Err(invalid("J", "need at least one inner step"));
    }
    let schedule = StepSchedule::Pgsg {
        mu: rho,
        gamma: 1.0 / (rho + oracle.weak_convexity()),
    };
    schedule.validate()?;
    let direction = if ascent_sign { 1.0 } else { -1.0 };
    let n = x1.dim();
    let mut x = x1.clone();
    let mut records = Vec::with_capacity(t);
    let mut points = vec![x.clone()];
    let mut evaluations = 0;
    let mut g = vec![0.0; n];
    for k in 1..=t {
        let mut y = x.clone().into_vec();
        let mut f_center = f64::NAN;
        for j in 0..j_inner {
            let value = oracle.evaluate_into(&y, &mut g)?;
            evaluations += 1;
            if j == 0 {
                f_center = value;
            }
            let step = direction * schedule.step(j);
            for ((yi, gi), ci) in y.iter_mut().zip(&g).zip(x.iter()) {
                let v = gi + rho * (*yi - ci);
                *yi += step * v;
            }
        }
        let next = Point::new(y)?;
        records.push(BaselineRecord {
            k,
            f_value: f_center,
            step_norm_sq: next.dist_sq(&x),
            moreau_grad_norm_sq: None,
            evaluations,
        });
        observer(records.last().expect("just pushed"));
        points.push(next.clone());
        x = next;
    }
    Ok(BaselineReport {
        records,
        points,
        evaluations,
        termination: BaselineTermination::Completed,
    })
}
