//! Dense real vectors.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `R^n`, `n >= 1`.
///
/// [`Point::new`] rejects empty and non-finite input. Arithmetic helpers do
/// not re-validate; oracles check finiteness on every evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coordinates: Vec<f64>) -> Result<Self> {
        if coordinates.is_empty() {
            return Err(Error::EmptyPoint);
        }
        if let Some((index, &value)) = coordinates.iter().enumerate().find(|(_, v)| !v.is_finite())
        {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Point(coordinates))
    }

    pub fn from_slice(coordinates: &[f64]) -> Result<Self> {
        Self::new(coordinates.to_vec())
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    /// Wraps arithmetic output without validation.
    pub(crate) fn raw(coordinates: Vec<f64>) -> Self {
        Point(coordinates)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist_sq(&self, other: &[f64]) -> f64 {
        dist_sq(&self.0, other)
    }

    /// `self - other`
    pub fn sub(&self, other: &[f64]) -> Point {
        debug_assert_eq!(self.dim(), other.len());
        Point(self.0.iter().zip(other).map(|(a, b)| a - b).collect())
    }

    /// `self + scale * direction`
    pub fn add_scaled(&self, scale: f64, direction: &[f64]) -> Point {
        debug_assert_eq!(self.dim(), direction.len());
        Point(
            self.0
                .iter()
                .zip(direction)
                .map(|(a, d)| a + scale * d)
                .collect(),
        )
    }

    pub fn scale(&self, factor: f64) -> Point {
        Point(self.0.iter().map(|a| factor * a).collect())
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
