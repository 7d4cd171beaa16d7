//! First-order oracles for weakly convex functions.

use crate::error::{Error, Result};
use crate::point::{dist_sq, Point};

/// Value and one subgradient of `f` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub subgradient: Point,
}

/// Access to an `m`-weakly convex function through values and subgradients.
///
/// Implementations must be deterministic and must return a subgradient `g` at
/// `x` with `f(y) >= f(x) + <g, y - x> - (m/2)|y - x|^2` for every `y`, where
/// `m` is [`Oracle::weak_convexity`].
pub trait Oracle: Send + Sync {
    fn dim(&self) -> usize;

    /// The weak-convexity modulus `m >= 0`.
    fn weak_convexity(&self) -> f64;

    fn lipschitz(&self) -> Option<f64> {
        None
    }

    fn smoothness(&self) -> Option<f64> {
        None
    }

    /// Known optimal value, for test problems.
    fn optimal_value(&self) -> Option<f64> {
        None
    }

    /// Writes a subgradient at `x` into `sub` and returns `f(x)`.
    ///
    /// Callers guarantee `x.len() == sub.len() == self.dim()`.
    fn value_and_subgradient(&self, x: &[f64], sub: &mut [f64]) -> f64;

    /// Checked evaluation into a caller buffer.
    fn evaluate_into(&self, x: &[f64], sub: &mut [f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), sub.len())?;
        if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        let value = self.value_and_subgradient(x, sub);
        if !value.is_finite() || sub.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEvaluation);
        }
        Ok(value)
    }

    fn evaluate(&self, x: &Point) -> Result<Evaluation> {
        let mut sub = vec![0.0; x.dim()];
        let value = self.evaluate_into(x, &mut sub)?;
        Ok(Evaluation {
            value,
            subgradient: Point::raw(sub),
        })
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

impl<O: Oracle + ?Sized> Oracle for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn weak_convexity(&self) -> f64 {
        (**self).weak_convexity()
    }
    fn lipschitz(&self) -> Option<f64> {
        (**self).lipschitz()
    }
    fn smoothness(&self) -> Option<f64> {
        (**self).smoothness()
    }
    fn optimal_value(&self) -> Option<f64> {
        (**self).optimal_value()
    }
    fn value_and_subgradient(&self, x: &[f64], sub: &mut [f64]) -> f64 {
        (**self).value_and_subgradient(x, sub)
    }
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn weak_convexity(&self) -> f64 {
        (**self).weak_convexity()
    }
    fn lipschitz(&self) -> Option<f64> {
        (**self).lipschitz()
    }
    fn smoothness(&self) -> Option<f64> {
        (**self).smoothness()
    }
    fn optimal_value(&self) -> Option<f64> {
        (**self).optimal_value()
    }
    fn value_and_subgradient(&self, x: &[f64], sub: &mut [f64]) -> f64 {
        (**self).value_and_subgradient(x, sub)
    }
}

/// `f(.) + (m/2)|. - center|^2`, a convex function when `f` is `m`-weakly convex.
pub struct Convexified<O> {
    inner: O,
    center: Point,
    m: f64,
}

pub fn convexify<O: Oracle>(oracle: O, center: &Point) -> Result<Convexified<O>> {
    check_dim(oracle.dim(), center.dim())?;
    if !center.is_finite() {
        return Err(Error::NonFiniteEvaluation);
    }
    let m = oracle.weak_convexity();
    Ok(Convexified {
        inner: oracle,
        center: center.clone(),
        m,
    })
}

impl<O> Convexified<O> {
    pub fn center(&self) -> &Point {
        &self.center
    }

    /// Weak-convexity modulus of the wrapped function.
    pub fn modulus(&self) -> f64 {
        self.m
    }
}

impl<O: Oracle> Oracle for Convexified<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn weak_convexity(&self) -> f64 {
        0.0
    }

    fn smoothness(&self) -> Option<f64> {
        self.inner.smoothness().map(|big_m| big_m + self.m)
    }

    fn value_and_subgradient(&self, y: &[f64], sub: &mut [f64]) -> f64 {
        let value = self.inner.value_and_subgradient(y, sub);
        for ((s, yi), ci) in sub.iter_mut().zip(y).zip(self.center.iter()) {
            *s += self.m * (yi - ci);
        }
        value + 0.5 * self.m * dist_sq(y, &self.center)
    }
}

type EvalFn = dyn Fn(&[f64], &mut [f64]) -> f64 + Send + Sync;

/// An oracle from a closure, with declared constants.
pub struct FnOracle {
    dim: usize,
    m: f64,
    lipschitz: Option<f64>,
    smoothness: Option<f64>,
    optimal_value: Option<f64>,
    f: Box<EvalFn>,
}

impl FnOracle {
    pub fn new(
        dim: usize,
        m: f64,
        f: impl Fn(&[f64], &mut [f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FnOracle {
            dim,
            m,
            lipschitz: None,
            smoothness: None,
            optimal_value: None,
            f: Box::new(f),
        }
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_smoothness(mut self, big_m: f64) -> Self {
        self.smoothness = Some(big_m);
        self
    }

    pub fn with_optimal_value(mut self, f_star: f64) -> Self {
        self.optimal_value = Some(f_star);
        self
    }
}

impl Oracle for FnOracle {
    fn dim(&self) -> usize {
        self.dim
    }
    fn weak_convexity(&self) -> f64 {
        self.m
    }
    fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }
    fn smoothness(&self) -> Option<f64> {
        self.smoothness
    }
    fn optimal_value(&self) -> Option<f64> {
        self.optimal_value
    }
    fn value_and_subgradient(&self, x: &[f64], sub: &mut [f64]) -> f64 {
        (self.f)(x, sub)
    }
}
