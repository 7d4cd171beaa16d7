//! Moreau envelopes and conversions between stationarity measures.
//!
//! For `rho > m` the envelope `f_rho(x) = min_y f(y) + (rho/2)|y - x|^2` has
//! gradient `rho (x - x^)` at the proximal point `x^`. [`moreau_reference`]
//! computes `x^` with a certified gap between a dual lower bound from a cut
//! bundle and the best evaluated objective value.

use serde::{Deserialize, Serialize};

use crate::bundle::CutBundle;
use crate::error::{invalid, Error, Result};
use crate::oracle::{check_dim, Oracle};
use crate::point::Point;

pub const DEFAULT_REFERENCE_TOL: f64 = 1e-12;

/// Settings of the reference envelope solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoreauOptions {
    /// Target for `upper - lower`.
    pub tol: f64,
    pub max_iter: usize,
    /// Bundle capacity; 2 gives the essential two-cut model.
    pub max_cuts: usize,
}

impl Default for MoreauOptions {
    fn default() -> Self {
        MoreauOptions {
            tol: DEFAULT_REFERENCE_TOL,
            max_iter: 100_000,
            max_cuts: 40,
        }
    }
}

impl MoreauOptions {
    pub fn with_tol(tol: f64) -> Self {
        MoreauOptions {
            tol,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoreauResult {
    /// `f(x)`.
    pub f_x: f64,
    pub prox_point: Point,
    /// Upper bound on `f_rho(x)`: the objective at `prox_point`.
    pub envelope_value: f64,
    /// Certified lower bound on `f_rho(x)`.
    pub lower_bound: f64,
    /// `rho (x - prox_point)`.
    pub gradient: Point,
    /// `envelope_value - lower_bound`.
    pub certified_gap: f64,
    pub iterations: usize,
    pub evaluations: u64,
}

impl MoreauResult {
    /// Bound on `|prox_point - x^|` from strong convexity of modulus `rho - m`.
    pub fn prox_point_error_bound(&self, rho: f64, m: f64) -> f64 {
        (2.0 * self.certified_gap / (rho - m)).sqrt()
    }
}

/// Reference solve with default options and gap tolerance `tol`.
pub fn moreau_reference<O: Oracle + ?Sized>(
    oracle: &O,
    x: &Point,
    rho_env: f64,
    tol: f64,
) -> Result<MoreauResult> {
    moreau_reference_with(oracle, x, rho_env, &MoreauOptions::with_tol(tol))
}

/// Minimizes `f(y) + (rho_env/2)|y - x|^2` by a proximal bundle loop on the
/// convexified function `f + (m/2)|. - x|^2` with proximal parameter `rho_env - m`.
/// Stops once the best evaluated objective is within `tol` of the dual lower bound.
pub fn moreau_reference_with<O: Oracle + ?Sized>(
    oracle: &O,
    x: &Point,
    rho_env: f64,
    options: &MoreauOptions,
) -> Result<MoreauResult> {
    check_dim(oracle.dim(), x.dim())?;
    let m = oracle.weak_convexity();
    if !(rho_env > m && rho_env.is_finite()) {
        return Err(invalid(
            "rho_env",
            format!("must exceed m = {m}, got {rho_env}"),
        ));
    }
    let tol = options.tol;
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let first = oracle.evaluate(x)?;
    let f_x = first.value;
    let mut best = x.clone();
    let mut upper = f_x;
    let mut bundle = CutBundle::new(
        x.clone(),
        rho_env - m,
        options.max_cuts,
        f_x,
        first.subgradient,
    )?;
    let mut evaluations = 1u64;
    let mut lower = f64::NEG_INFINITY;

    for iteration in 1..=options.max_iter {
        let step = bundle.solve(0.01 * tol);
        lower = lower.max(step.lower_bound);
        let z = step.minimizer;
        let eval = oracle.evaluate(&z)?;
        evaluations += 1;
        let shift_sq = z.dist_sq(x);
        let candidate = eval.value + 0.5 * rho_env * shift_sq;
        if candidate < upper {
            upper = candidate;
            best = z.clone();
        }
        if upper - lower <= tol {
            return Ok(bracket(
                x,
                f_x,
                best,
                upper,
                lower,
                rho_env,
                iteration,
                evaluations,
            ));
        }
        let slope = eval.subgradient.add_scaled(m, &z.sub(x));
        bundle.add_cut(&z, eval.value + 0.5 * m * shift_sq, slope)?;
    }
    Err(Error::ReferenceBudgetExhausted {
        iterations: options.max_iter,
        gap: upper - lower,
        tol,
        partial: Box::new(bracket(
            x,
            f_x,
            best,
            upper,
            lower,
            rho_env,
            options.max_iter,
            evaluations,
        )),
    })
}

#[allow(clippy::too_many_arguments)]
fn bracket(
    x: &Point,
    f_x: f64,
    best: Point,
    upper: f64,
    lower: f64,
    rho_env: f64,
    iterations: usize,
    evaluations: u64,
) -> MoreauResult {
    MoreauResult {
        f_x,
        gradient: x.sub(&best).scale(rho_env),
        prox_point: best,
        envelope_value: upper,
        lower_bound: lower,
        certified_gap: (upper - lower).max(0.0),
        iterations,
        evaluations,
    }
}

/// `f(x) - f_alpha(x)` from a reference solve, using its lower bound so the result
/// over-estimates the true gap by at most `tol`.
pub fn proximal_gap<O: Oracle + ?Sized>(
    oracle: &O,
    x: &Point,
    alpha: f64,
    tol: f64,
) -> Result<f64> {
    let reference = moreau_reference(oracle, x, alpha, tol)?;
    Ok((reference.f_x - reference.lower_bound).max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityCertificate {
    pub eta: f64,
    pub eps: f64,
    /// Bound on `|grad f_alpha|`, when known.
    pub moreau_delta: Option<f64>,
    pub alpha: f64,
}

/// Bound on `|grad f_{m + lambda}(x)|` at an `(eta, eps)`-inexact stationary point:
/// `(m + lambda)(2 eta / lambda + sqrt(2 eps / lambda))`.
pub fn is_to_ms_bound(eta: f64, eps: f64, m: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(invalid("lambda", "must be positive"));
    }
    check_nonneg("eta", eta)?;
    check_nonneg("eps", eps)?;
    Ok((m + lambda) * (2.0 * eta / lambda + (2.0 * eps / lambda).sqrt()))
}

/// `(eta, eps) = (L delta / alpha, sqrt(2 (alpha - m) L delta / alpha))` for a point with
/// `|grad f_alpha| <= delta` on an `L`-Lipschitz function.
pub fn ms_to_is_bound(delta: f64, alpha: f64, m: f64, lipschitz: f64) -> Result<(f64, f64)> {
    if !(alpha > m) {
        return Err(invalid("alpha", format!("must exceed m = {m}")));
    }
    check_nonneg("delta", delta)?;
    check_nonneg("lipschitz", lipschitz)?;
    Ok((
        lipschitz * delta / alpha,
        (2.0 * (alpha - m) * lipschitz * delta / alpha).sqrt(),
    ))
}

/// Bound on `|grad f(x)|` at an `(eta, eps)`-inexact stationary point of an
/// `M`-smooth function: `(1 + M/alpha) alpha (2 eta / lambda + sqrt(2 eps / lambda))`, `lambda = alpha - m`.
pub fn is_to_grad_bound(eta: f64, eps: f64, m: f64, alpha: f64, smoothness: f64) -> Result<f64> {
    if !(alpha > m) {
        return Err(invalid("alpha", format!("must exceed m = {m}")));
    }
    check_nonneg("smoothness", smoothness)?;
    check_nonneg("eta", eta)?;
    check_nonneg("eps", eps)?;
    let lambda = alpha - m;
    Ok((1.0 + smoothness / alpha) * alpha * (2.0 * eta / lambda + (2.0 * eps / lambda).sqrt()))
}

/// Certificate implied by a proximal gap `f(x) - f_alpha(x) = delta_k`, `alpha = m + rho`.
pub fn prox_gap_certificate(delta_k: f64, rho: f64, m: f64) -> Result<StationarityCertificate> {
    check_nonneg("delta_k", delta_k)?;
    if !(rho > 0.0) {
        return Err(invalid("rho", "must be positive"));
    }
    let alpha = m + rho;
    Ok(StationarityCertificate {
        eta: (2.0 * rho * delta_k).sqrt(),
        eps: delta_k,
        moreau_delta: Some((2.0 * alpha * alpha * delta_k / rho).sqrt()),
        alpha,
    })
}

/// Upper estimate of `f_{m + rho}(w)` for an `m`-weakly convex function, where `dist` is
/// the distance from `w` to its nearest minimizer `x*` and
/// `lambda = f(w) - f(x*) - (m/2) dist^2`.
pub fn qg_moreau_upper_bound(f_w: f64, lambda: f64, dist: f64, rho: f64) -> Result<f64> {
    check_nonneg("Lambda", lambda)?;
    if !(dist > 0.0) {
        return Err(invalid("dist", "must be positive"));
    }
    if !(rho > 0.0) {
        return Err(invalid("rho", "must be positive"));
    }
    let rd2 = rho * dist * dist;
    Ok(if lambda > rd2 {
        f_w - lambda + 0.5 * rd2
    } else {
        f_w - lambda * lambda / (2.0 * rd2)
    })
}

fn check_nonneg(name: &'static str, v: f64) -> Result<()> {
    if !(v >= 0.0) {
        return Err(invalid(name, format!("must be nonnegative, got {v}")));
    }
    Ok(())
}
