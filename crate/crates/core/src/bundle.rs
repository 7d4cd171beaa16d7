//! Cuts and the two-cut essential model of a convexified function.
//!
//! For a center `x_k` the model minorizes `f(.) + (m/2)|. - x_k|^2`. It keeps
//! the aggregate cut of the last proximal step and the newest subgradient cut,
//! both anchored at the last trial point, so the proximal subproblem
//! `min_y max(l_1, l_2)(y) + (rho/2)|y - x_k|^2` reduces to a scalar problem
//! in the mixing weight `theta` with a closed-form solution.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::oracle::{check_dim, Evaluation, Oracle};
use crate::point::{dot, Point};

/// Relative threshold below which the two cut slopes count as parallel.
const PARALLEL_SLOPES: f64 = 1e-14;
/// Relative tolerance of the canonical-aggregate check.
const CANONICAL_TOL: f64 = 1e-9;

/// The affine function `y -> anchor_value + <slope, y - anchor>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub anchor: Point,
    pub anchor_value: f64,
    pub slope: Point,
}

impl Cut {
    pub fn value_at(&self, y: &[f64]) -> f64 {
        let mut acc = self.anchor_value;
        for ((s, yi), ai) in self.slope.iter().zip(y).zip(self.anchor.iter()) {
            acc += s * (yi - ai);
        }
        acc
    }
}

/// `f(x_k) + <g_1, . - x_k>` with `g_1` a subgradient at the center.
pub fn initial_cut<O: Oracle + ?Sized>(oracle: &O, center: &Point) -> Result<Cut> {
    let eval = oracle.evaluate(center)?;
    Ok(initial_cut_from(center, eval))
}

pub fn initial_cut_from(center: &Point, eval: Evaluation) -> Cut {
    Cut {
        anchor: center.clone(),
        anchor_value: eval.value,
        slope: eval.subgradient,
    }
}

/// The cut of the convexified function at `z`:
/// value `f(z) + (m/2)|z - x_k|^2`, slope `v + m(z - x_k)` with `v` a subgradient of `f` at `z`.
pub fn subgradient_cut<O: Oracle + ?Sized>(oracle: &O, z: &Point, center: &Point) -> Result<Cut> {
    check_dim(z.dim(), center.dim())?;
    let eval = oracle.evaluate(z)?;
    Ok(subgradient_cut_from(
        z,
        &eval,
        center,
        oracle.weak_convexity(),
    ))
}

pub fn subgradient_cut_from(z: &Point, eval: &Evaluation, center: &Point, m: f64) -> Cut {
    let shift = z.sub(center);
    Cut {
        anchor: z.clone(),
        anchor_value: eval.value + 0.5 * m * shift.norm_sq(),
        slope: eval.subgradient.add_scaled(m, &shift),
    }
}

/// `f~(z) + <rho(x_k - z), . - z>`, the aggregate cut at a proximal step's minimizer `z`.
pub fn aggregate_cut_from_step(model_value_at_z: f64, z: &Point, center: &Point, rho: f64) -> Cut {
    Cut {
        anchor: z.clone(),
        anchor_value: model_value_at_z,
        slope: center.sub(z).scale(rho),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProxStepOutcome {
    pub minimizer: Point,
    pub theta: f64,
    /// Optimal value `eta = f~(y*) + (rho/2)|y* - x_k|^2` of the subproblem.
    pub optimal_value: f64,
    /// `f~(y*)`.
    pub model_value: f64,
    /// `rho(x_k - y*)`, a subgradient of the model at `y*`.
    pub aggregate_slope: Point,
    /// `|s - g|^2` for the two slopes of the model that produced this step.
    pub slope_diff_sq: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EssentialModel {
    center: Point,
    rho: f64,
    m: f64,
    aggregate_cut: Cut,
    newest_cut: Cut,
}

impl EssentialModel {
    /// The first model of an inner loop: the initial cut stored in both slots.
    pub fn new(center: Point, rho: f64, m: f64, initial: Cut) -> Result<Self> {
        Self::from_cuts(center, rho, m, initial.clone(), initial)
    }

    pub fn from_cuts(
        center: Point,
        rho: f64,
        m: f64,
        aggregate_cut: Cut,
        newest_cut: Cut,
    ) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(invalid("rho", format!("must be positive, got {rho}")));
        }
        if !(m >= 0.0 && m.is_finite()) {
            return Err(invalid("m", format!("must be nonnegative, got {m}")));
        }
        for cut in [&aggregate_cut, &newest_cut] {
            check_dim(center.dim(), cut.anchor.dim())?;
            check_dim(center.dim(), cut.slope.dim())?;
        }
        Ok(EssentialModel {
            center,
            rho,
            m,
            aggregate_cut,
            newest_cut,
        })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn aggregate_cut(&self) -> &Cut {
        &self.aggregate_cut
    }

    pub fn newest_cut(&self) -> &Cut {
        &self.newest_cut
    }

    /// `f~(y)`, the larger of the two cuts.
    pub fn value_at(&self, y: &[f64]) -> f64 {
        self.aggregate_cut
            .value_at(y)
            .max(self.newest_cut.value_at(y))
    }

    /// Solves `min_y f~(y) + (rho/2)|y - x_k|^2` in closed form.
    pub fn prox_step(&self) -> Result<ProxStepOutcome> {
        let rho = self.rho;
        let c = &self.center;
        let s = &self.aggregate_cut.slope;
        let g = &self.newest_cut.slope;

        let (theta, slope_diff_sq) = if self.aggregate_cut == self.newest_cut {
            (0.0, 0.0)
        } else {
            if self.aggregate_cut.anchor != self.newest_cut.anchor {
                return Err(Error::AnchorMismatch);
            }
            let z = &self.aggregate_cut.anchor;
            let canonical = c.sub(z).scale(rho);
            let s_norm_sq = s.norm_sq();
            if s.dist_sq(&canonical).sqrt() > CANONICAL_TOL * s_norm_sq.sqrt().max(1.0) {
                return Err(Error::NonCanonicalAggregate);
            }
            let gap = self.newest_cut.anchor_value - self.aggregate_cut.anchor_value;
            let d_sq = s.dist_sq(g);
            let scale = 1f64.max(s_norm_sq).max(g.norm_sq());
            let theta = if d_sq <= PARALLEL_SLOPES * scale {
                if gap > 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (rho * gap / d_sq).clamp(0.0, 1.0)
            };
            (theta, d_sq)
        };

        // v = (1 - theta) s + theta g, y* = x_k - v / rho
        let v: Vec<f64> = s
            .iter()
            .zip(g.iter())
            .map(|(si, gi)| (1.0 - theta) * si + theta * gi)
            .collect();
        let minimizer = c.add_scaled(-1.0 / rho, &v);
        let model_value = self.value_at(&minimizer);
        let aggregate_slope = c.sub(&minimizer).scale(rho);
        let optimal_value = model_value + 0.5 * rho * minimizer.dist_sq(c);
        Ok(ProxStepOutcome {
            minimizer,
            theta,
            optimal_value,
            model_value,
            aggregate_slope,
            slope_diff_sq,
        })
    }

    /// Replaces the cuts by the aggregate cut of `step` and `new_cut`, both anchored at `step.minimizer`.
    pub fn update(&mut self, step: &ProxStepOutcome, new_cut: Cut) -> Result<()> {
        if new_cut.anchor != step.minimizer {
            return Err(Error::AnchorMismatch);
        }
        check_dim(self.center.dim(), new_cut.slope.dim())?;
        self.aggregate_cut = Cut {
            anchor: step.minimizer.clone(),
            anchor_value: step.model_value,
            slope: step.aggregate_slope.clone(),
        };
        self.newest_cut = new_cut;
        Ok(())
    }
}

/// A bundle of up to `max_cuts` cuts for the same proximal subproblem, used by
/// the reference envelope solver.
///
/// Cuts are stored as `y -> a_i + <g_i, y - x_k>`. The subproblem is solved
/// through its dual over the simplex,
///
/// ```text
/// max_lambda  sum_i lambda_i a_i - |sum_i lambda_i g_i|^2 / (2 rho),
/// ```
///
/// by an active-set method polished with pairwise steps. Any feasible `lambda` gives a valid lower
/// bound, so the solve need not be exact. When the bundle is full, cuts with
/// zero weight are dropped and then the two lightest cuts are merged into
/// their weighted combination, which leaves the dual value unchanged. With
/// `max_cuts = 2` this is the essential model.
#[derive(Clone, Debug)]
pub struct CutBundle {
    center: Point,
    rho: f64,
    max_cuts: usize,
    values: Vec<f64>,
    slopes: Vec<Vec<f64>>,
    gram: Vec<Vec<f64>>,
    lambda: Vec<f64>,
}

/// Solution of a [`CutBundle`] subproblem.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleStep {
    pub minimizer: Point,
    /// Dual value, a lower bound on the subproblem optimum.
    pub lower_bound: f64,
    /// `f~(y*) + (rho/2)|y* - x_k|^2` at the returned minimizer.
    pub primal_value: f64,
}

impl CutBundle {
    pub fn new(
        center: Point,
        rho: f64,
        max_cuts: usize,
        value_at_center: f64,
        slope: Point,
    ) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(invalid("rho", format!("must be positive, got {rho}")));
        }
        if max_cuts < 2 {
            return Err(invalid("max_cuts", "need room for at least two cuts"));
        }
        check_dim(center.dim(), slope.dim())?;
        let g = slope.into_vec();
        let g2 = g.iter().map(|v| v * v).sum::<f64>();
        Ok(CutBundle {
            center,
            rho,
            max_cuts,
            values: vec![value_at_center],
            slopes: vec![g],
            gram: vec![vec![g2]],
            lambda: vec![1.0],
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Adds the cut `f(z) + <g, y - z>` (already convexified), compressing first if full.
    pub fn add_cut(&mut self, anchor: &Point, anchor_value: f64, slope: Point) -> Result<()> {
        check_dim(self.center.dim(), anchor.dim())?;
        check_dim(self.center.dim(), slope.dim())?;
        if self.len() >= self.max_cuts {
            self.compress();
        }
        let g = slope.into_vec();
        let value_at_center = anchor_value
            + g.iter()
                .zip(self.center.iter().zip(anchor.iter()))
                .map(|(gi, (c, a))| gi * (c - a))
                .sum::<f64>();
        let row: Vec<f64> = self.slopes.iter().map(|s| dot(s, &g)).collect();
        for (r, v) in self.gram.iter_mut().zip(&row) {
            r.push(*v);
        }
        let mut row = row;
        row.push(dot(&g, &g));
        self.gram.push(row);
        self.values.push(value_at_center);
        self.slopes.push(g);
        self.lambda.push(0.0);
        Ok(())
    }

    fn remove(&mut self, i: usize) {
        self.values.remove(i);
        self.slopes.remove(i);
        self.lambda.remove(i);
        self.gram.remove(i);
        for r in &mut self.gram {
            r.remove(i);
        }
    }

    fn compress(&mut self) {
        let mut i = 0;
        while i < self.len() && self.len() > 1 {
            if self.lambda[i] == 0.0 {
                self.remove(i);
            } else {
                i += 1;
            }
        }
        while self.len() >= self.max_cuts {
            let mut order: Vec<usize> = (0..self.len()).collect();
            order.sort_by(|&a, &b| self.lambda[a].total_cmp(&self.lambda[b]));
            let (i, j) = (order[0].min(order[1]), order[0].max(order[1]));
            let (li, lj) = (self.lambda[i], self.lambda[j]);
            let total = li + lj;
            let (wi, wj) = if total > 0.0 {
                (li / total, lj / total)
            } else {
                (0.5, 0.5)
            };
            let g: Vec<f64> = self.slopes[i]
                .iter()
                .zip(&self.slopes[j])
                .map(|(a, b)| wi * a + wj * b)
                .collect();
            let value = wi * self.values[i] + wj * self.values[j];
            self.remove(j);
            self.values[i] = value;
            self.lambda[i] = total;
            let row: Vec<f64> = self.slopes.iter().map(|s| dot(s, &g)).collect();
            self.slopes[i] = g;
            for (k, v) in row.iter().enumerate() {
                self.gram[i][k] = *v;
                self.gram[k][i] = *v;
            }
            self.gram[i][i] = dot(&self.slopes[i], &self.slopes[i]);
        }
    }

    /// `(G^T G lambda)_i / rho - a_i`, the gradient of the dual in minimization form.
    fn dual_grad(&self, i: usize) -> f64 {
        dot(&self.gram[i], &self.lambda) / self.rho - self.values[i]
    }

    /// Primal active-set method on the simplex, warm-started from the support
    /// of the current weights. Each pass solves the equality-constrained
    /// problem on the support (lightly regularized, since the Gram matrix is
    /// singular once there are more cuts than dimensions plus one), then
    /// either steps back to the first weight that hits zero or admits the cut
    /// with the most negative gradient.
    fn active_set(&mut self, tol: f64, scale: f64) {
        let k = self.len();
        let reg = 1e-13 * scale;
        let mut support: Vec<usize> = (0..k).filter(|&i| self.lambda[i] > 0.0).collect();
        for _ in 0..4 * k + 8 {
            let s = support.len();
            let kkt = DMatrix::from_fn(s + 1, s + 1, |r, c| match (r < s, c < s) {
                (true, true) => {
                    self.gram[support[r]][support[c]] / self.rho + if r == c { reg } else { 0.0 }
                }
                (false, false) => 0.0,
                _ => 1.0,
            });
            let rhs = DVector::from_fn(
                s + 1,
                |r, _| if r < s { self.values[support[r]] } else { 1.0 },
            );
            let Some(sol) = kkt.lu().solve(&rhs) else {
                return;
            };
            if sol.iter().any(|v| !v.is_finite()) {
                return;
            }
            let blocking = (0..s)
                .filter(|&r| sol[r] < 0.0)
                .map(|r| {
                    let l = self.lambda[support[r]];
                    (r, l / (l - sol[r]))
                })
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((r0, t)) = blocking {
                for (r, &i) in support.iter().enumerate() {
                    self.lambda[i] += t * (sol[r] - self.lambda[i]);
                }
                self.lambda[support[r0]] = 0.0;
                support.retain(|&i| self.lambda[i] > 0.0);
                continue;
            }
            for (r, &i) in support.iter().enumerate() {
                self.lambda[i] = sol[r];
            }
            let level = support
                .iter()
                .map(|&i| self.dual_grad(i))
                .fold(f64::NEG_INFINITY, f64::max);
            let entering = (0..k)
                .filter(|i| !support.contains(i))
                .map(|i| (i, self.dual_grad(i)))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match entering {
                Some((j, g)) if g < level - tol => support.push(j),
                _ => return,
            }
        }
    }

    /// Maximizes the dual, warm-started from the previous weights, until the
    /// dual value is within `accuracy` of the model optimum.
    pub fn solve(&mut self, accuracy: f64) -> BundleStep {
        let k = self.len();
        let rho = self.rho;
        let scale = self.values.iter().fold(1f64, |m, v| m.max(v.abs()))
            + self
                .gram
                .iter()
                .enumerate()
                .fold(0f64, |m, (i, r)| m.max(r[i]))
                / rho;
        let tol = accuracy.max(1e-16 * scale);
        self.active_set(tol, scale);
        // Pairwise steps polish whatever the active set left behind.
        let mut grad: Vec<f64> = (0..k).map(|i| self.dual_grad(i)).collect();
        for _ in 0..200 * k.max(1) {
            let up = (0..k).min_by(|&a, &b| grad[a].total_cmp(&grad[b])).unwrap();
            let down = (0..k)
                .filter(|&j| self.lambda[j] > 0.0)
                .max_by(|&a, &b| grad[a].total_cmp(&grad[b]))
                .unwrap();
            let violation = grad[down] - grad[up];
            // On the simplex the dual suboptimality is at most the violation.
            if up == down || violation <= tol {
                break;
            }
            let curvature =
                (self.gram[up][up] + self.gram[down][down] - 2.0 * self.gram[up][down]) / rho;
            let t = if curvature > 0.0 {
                (violation / curvature).min(self.lambda[down])
            } else {
                self.lambda[down]
            };
            if t <= 0.0 {
                break;
            }
            self.lambda[up] += t;
            self.lambda[down] -= t;
            if self.lambda[down] < 1e-300 {
                self.lambda[down] = 0.0;
            }
            for (i, gi) in grad.iter_mut().enumerate() {
                *gi += t * (self.gram[i][up] - self.gram[i][down]) / rho;
            }
        }
        // Renormalize against drift, then evaluate everything from scratch.
        let total: f64 = self.lambda.iter().sum();
        self.lambda.iter_mut().for_each(|l| *l /= total);
        let n = self.center.dim();
        let mut v = vec![0.0; n];
        for (l, g) in self.lambda.iter().zip(&self.slopes) {
            if *l > 0.0 {
                v.iter_mut().zip(g).for_each(|(vi, gi)| *vi += l * gi);
            }
        }
        let v_sq = dot(&v, &v);
        let lower_bound = dot(&self.lambda, &self.values) - v_sq / (2.0 * rho);
        let minimizer = self.center.add_scaled(-1.0 / rho, &v);
        let shift: Vec<f64> = v.iter().map(|vi| -vi / rho).collect();
        let model = self
            .values
            .iter()
            .zip(&self.slopes)
            .map(|(a, g)| a + dot(g, &shift))
            .fold(f64::NEG_INFINITY, f64::max);
        BundleStep {
            minimizer,
            lower_bound,
            primal_value: model + 0.5 * rho * dot(&shift, &shift),
        }
    }
}
