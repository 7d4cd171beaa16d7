//! Seeded random streams.
//!
//! Uniform draws come from ChaCha8. Normal draws use the Box-Muller transform
//! on pairs of uniforms, so a seed fixes the whole sequence on a given build.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::point::Point;

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// An independent stream for cell `index` of a parallel experiment.
    pub fn for_cell(master_seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(index.wrapping_add(1));
        RngStream {
            seed: master_seed,
            rng,
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn uniform_below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - u lies in (0, 1], keeping the logarithm finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare_normal = Some(r * s);
        r * c
    }

    pub fn standard_normal_vector(&mut self, n: usize) -> Result<Point> {
        if n < 1 {
            return Err(invalid("n", "need at least one coordinate"));
        }
        Ok(Point::raw((0..n).map(|_| self.standard_normal()).collect()))
    }

    /// Uniform on the unit sphere of `R^n`.
    pub fn unit_sphere(&mut self, n: usize) -> Result<Point> {
        loop {
            let v = self.standard_normal_vector(n)?;
            let norm = v.norm();
            if norm > 1e-12 {
                return Ok(v.scale(1.0 / norm));
            }
        }
    }

    /// Uniform in the box `[lo, hi]^n`.
    pub fn uniform_box(&mut self, n: usize, lo: f64, hi: f64) -> Point {
        Point::raw((0..n).map(|_| self.uniform_in(lo, hi)).collect())
    }
}
