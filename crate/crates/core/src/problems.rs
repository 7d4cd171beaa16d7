//! Benchmark problems and toy test functions.
//!
//! * Phase retrieval: `f(x) = (1/n) sum_i |<a_i, x>^2 - b_i|`.
//! * Blind deconvolution: `f(x, y) = (1/n) sum_i |<u_i, x><v_i, y> - b_i|` over the
//!   stacked variable `(x, y)` in `R^{2d}`.
//! * Toy functions with exact constants for tests.
//!
//! Generated instances interpolate: `b_i` is computed from a ground truth on the
//! unit sphere, so `f` vanishes there. At a tie (zero residual) the subgradient
//! uses the sign factor 0.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::oracle::Oracle;
use crate::point::{dot, Point};
use crate::rng::RngStream;

fn sign(r: f64) -> f64 {
    if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_sizes(d: usize, n: usize) -> Result<()> {
    if d < 1 {
        return Err(invalid("d", "must be at least 1"));
    }
    if n < 1 {
        return Err(invalid("n", "must be at least 1"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRetrievalInstance {
    pub d: usize,
    pub n: usize,
    pub seed: Option<u64>,
    /// Row-major `n x d` matrix of the vectors `a_i`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub ground_truth: Point,
    pub initial_point: Point,
    /// `(2/n) sum_i |a_i|^2`.
    pub m: f64,
}

/// Draws `a_i` from the standard Gaussian, the ground truth and the initial
/// point from the unit sphere, in that order, from the stream of `seed`.
pub fn gen_phase_retrieval(d: usize, n: usize, seed: u64) -> Result<PhaseRetrievalInstance> {
    check_sizes(d, n)?;
    let mut rng = RngStream::new(seed);
    let a = rng.standard_normal_vector(n * d)?.into_vec();
    let ground_truth = rng.unit_sphere(d)?;
    let initial_point = rng.unit_sphere(d)?;
    let mut inst = PhaseRetrievalInstance::from_data(d, a, None, ground_truth, initial_point)?;
    inst.seed = Some(seed);
    Ok(inst)
}

impl PhaseRetrievalInstance {
    /// Builds an instance from raw data. Without `b`, measurements are taken at the ground truth.
    pub fn from_data(
        d: usize,
        a: Vec<f64>,
        b: Option<Vec<f64>>,
        ground_truth: Point,
        initial_point: Point,
    ) -> Result<Self> {
        if d == 0 || a.is_empty() || !a.len().is_multiple_of(d) {
            return Err(invalid("a", "length must be a positive multiple of d"));
        }
        let n = a.len() / d;
        if ground_truth.dim() != d || initial_point.dim() != d {
            return Err(invalid("ground_truth", "dimension must equal d"));
        }
        let b = match b {
            Some(b) if b.len() != n => return Err(invalid("b", "need one measurement per row")),
            Some(b) => b,
            None => a
                .chunks_exact(d)
                .map(|ai| {
                    let t = dot(ai, &ground_truth);
                    t * t
                })
                .collect(),
        };
        let m = 2.0 * a.iter().map(|v| v * v).sum::<f64>() / n as f64;
        Ok(PhaseRetrievalInstance {
            d,
            n,
            seed: None,
            a,
            b,
            ground_truth,
            initial_point,
            m,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.d..(i + 1) * self.d]
    }

    /// Largest subgradient norm over `samples` uniform points of `[-half_width, half_width]^d`.
    /// The function is not globally Lipschitz; this is a diagnostic only.
    pub fn box_lipschitz_estimate(
        &self,
        half_width: f64,
        samples: usize,
        rng: &mut RngStream,
    ) -> f64 {
        box_lipschitz_estimate(self, half_width, samples, rng)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

impl Oracle for PhaseRetrievalInstance {
    fn dim(&self) -> usize {
        self.d
    }

    fn weak_convexity(&self) -> f64 {
        self.m
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(0.0)
    }

    fn value_and_subgradient(&self, x: &[f64], sub: &mut [f64]) -> f64 {
        sub.fill(0.0);
        let mut value = 0.0;
        for (ai, bi) in self.a.chunks_exact(self.d).zip(&self.b) {
            let t = dot(ai, x);
            let r = t * t - bi;
            value += r.abs();
            let coef = 2.0 * t * sign(r);
            if coef != 0.0 {
                for (s, aij) in sub.iter_mut().zip(ai) {
                    *s += coef * aij;
                }
            }
        }
        let inv_n = 1.0 / self.n as f64;
        sub.iter_mut().for_each(|s| *s *= inv_n);
        value * inv_n
    }
}

/// Which weak-convexity constant a blind deconvolution instance declares.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeconvModulus {
    /// `(1/n) sum_i |<u_i, v_i>|`. Smaller than the curvature of the bilinear
    /// terms allows in general; see [`BlindDeconvInstance::modulus_norm_product`].
    #[default]
    InnerProduct,
    /// `(1/n) sum_i |u_i| |v_i|`, the spectral norm of each term's Hessian.
    NormProduct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlindDeconvInstance {
    pub d: usize,
    pub n: usize,
    pub seed: Option<u64>,
    /// Row-major `n x d`.
    pub u: Vec<f64>,
    /// Row-major `n x d`.
    pub v: Vec<f64>,
    pub b: Vec<f64>,
    /// `(x, y)` stacked.
    pub ground_truth: Point,
    pub initial_point: Point,
    pub modulus: DeconvModulus,
    /// `(1/n) sum_i |<u_i, v_i>|`.
    pub modulus_inner_product: f64,
    /// `(1/n) sum_i |u_i| |v_i|`.
    pub modulus_norm_product: f64,
}

/// Draws `u_i`, then `v_i` from the standard Gaussian, then `x`, `y`, and the
/// two halves of the initial point from the unit sphere of `R^d`.
pub fn gen_blind_deconv(
    d: usize,
    n: usize,
    seed: u64,
    modulus: DeconvModulus,
) -> Result<BlindDeconvInstance> {
    check_sizes(d, n)?;
    let mut rng = RngStream::new(seed);
    let u = rng.standard_normal_vector(n * d)?.into_vec();
    let v = rng.standard_normal_vector(n * d)?.into_vec();
    let stack = |rng: &mut RngStream| -> Result<Point> {
        let mut w = rng.unit_sphere(d)?.into_vec();
        w.extend(rng.unit_sphere(d)?.into_vec());
        Ok(Point::raw(w))
    };
    let ground_truth = stack(&mut rng)?;
    let initial_point = stack(&mut rng)?;
    let mut inst =
        BlindDeconvInstance::from_data(d, u, v, None, ground_truth, initial_point, modulus)?;
    inst.seed = Some(seed);
    Ok(inst)
}

impl BlindDeconvInstance {
    pub fn from_data(
        d: usize,
        u: Vec<f64>,
        v: Vec<f64>,
        b: Option<Vec<f64>>,
        ground_truth: Point,
        initial_point: Point,
        modulus: DeconvModulus,
    ) -> Result<Self> {
        if d == 0 || u.is_empty() || !u.len().is_multiple_of(d) || u.len() != v.len() {
            return Err(invalid(
                "u",
                "u and v must have equal length, a positive multiple of d",
            ));
        }
        let n = u.len() / d;
        if ground_truth.dim() != 2 * d || initial_point.dim() != 2 * d {
            return Err(invalid("ground_truth", "dimension must equal 2d"));
        }
        let (gx, gy) = ground_truth.split_at(d);
        let b = match b {
            Some(b) if b.len() != n => return Err(invalid("b", "need one measurement per row")),
            Some(b) => b,
            None => u
                .chunks_exact(d)
                .zip(v.chunks_exact(d))
                .map(|(ui, vi)| dot(ui, gx) * dot(vi, gy))
                .collect(),
        };
        let (mut ip, mut np) = (0.0, 0.0);
        for (ui, vi) in u.chunks_exact(d).zip(v.chunks_exact(d)) {
            ip += dot(ui, vi).abs();
            np += (dot(ui, ui) * dot(vi, vi)).sqrt();
        }
        Ok(BlindDeconvInstance {
            d,
            n,
            seed: None,
            u,
            v,
            b,
            ground_truth,
            initial_point,
            modulus,
            modulus_inner_product: ip / n as f64,
            modulus_norm_product: np / n as f64,
        })
    }

    pub fn box_lipschitz_estimate(
        &self,
        half_width: f64,
        samples: usize,
        rng: &mut RngStream,
    ) -> f64 {
        box_lipschitz_estimate(self, half_width, samples, rng)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

impl Oracle for BlindDeconvInstance {
    fn dim(&self) -> usize {
        2 * self.d
    }

    fn weak_convexity(&self) -> f64 {
        match self.modulus {
            DeconvModulus::InnerProduct => self.modulus_inner_product,
            DeconvModulus::NormProduct => self.modulus_norm_product,
        }
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(0.0)
    }

    fn value_and_subgradient(&self, w: &[f64], sub: &mut [f64]) -> f64 {
        let d = self.d;
        let (x, y) = w.split_at(d);
        sub.fill(0.0);
        let mut value = 0.0;
        let rows = self.u.chunks_exact(d).zip(self.v.chunks_exact(d));
        for ((ui, vi), bi) in rows.zip(&self.b) {
            let (ux, vy) = (dot(ui, x), dot(vi, y));
            let r = ux * vy - bi;
            value += r.abs();
            let sg = sign(r);
            if sg != 0.0 {
                let (sx, sy) = sub.split_at_mut(d);
                for (s, uij) in sx.iter_mut().zip(ui) {
                    *s += sg * vy * uij;
                }
                for (s, vij) in sy.iter_mut().zip(vi) {
                    *s += sg * ux * vij;
                }
            }
        }
        let inv_n = 1.0 / self.n as f64;
        sub.iter_mut().for_each(|s| *s *= inv_n);
        value * inv_n
    }
}

fn box_lipschitz_estimate<O: Oracle + ?Sized>(
    oracle: &O,
    half_width: f64,
    samples: usize,
    rng: &mut RngStream,
) -> f64 {
    let mut sub = vec![0.0; oracle.dim()];
    (0..samples)
        .map(|_| {
            let x = rng.uniform_box(oracle.dim(), -half_width, half_width);
            oracle.value_and_subgradient(&x, &mut sub);
            dot(&sub, &sub).sqrt()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ToyKind {
    /// `|x|` (Euclidean norm), `m = 0`, `L = 1`.
    Abs,
    /// `| |x|^2 - 1 |`, `m = 2`.
    AbsQuadratic,
    /// `(mu/2)|x|^2`.
    Quadratic { mu: f64 },
    /// `5|x|^2 + cos(x_1)`, declared `m = 1`, `M = 11`, quadratic growth modulus 9, `f* = 1` at 0.
    SmoothQg,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyOracle {
    kind: ToyKind,
    dim: usize,
}

pub fn toy(kind: ToyKind, dim: usize) -> Result<ToyOracle> {
    if dim < 1 {
        return Err(invalid("dim", "must be at least 1"));
    }
    if let ToyKind::Quadratic { mu } = kind {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(invalid("mu", "must be positive"));
        }
    }
    Ok(ToyOracle { kind, dim })
}

impl ToyOracle {
    pub fn kind(&self) -> ToyKind {
        self.kind
    }

    /// `mu_q` with `f(x) - f* >= (mu_q/2) dist(x, S)^2`, where known.
    pub fn quadratic_growth(&self) -> Option<f64> {
        match self.kind {
            ToyKind::Abs | ToyKind::AbsQuadratic => None,
            ToyKind::Quadratic { mu } => Some(mu),
            ToyKind::SmoothQg => Some(9.0),
        }
    }

    /// Distance from `x` to the set of minimizers.
    pub fn distance_to_solutions(&self, x: &[f64]) -> f64 {
        let norm = dot(x, x).sqrt();
        match self.kind {
            ToyKind::AbsQuadratic => (norm - 1.0).abs(),
            _ => norm,
        }
    }

    /// The minimizer nearest to `x`.
    pub fn nearest_solution(&self, x: &[f64]) -> Point {
        match self.kind {
            ToyKind::AbsQuadratic => {
                let norm = dot(x, x).sqrt();
                if norm > 0.0 {
                    Point::raw(x.iter().map(|v| v / norm).collect())
                } else {
                    let mut e1 = vec![0.0; x.len()];
                    e1[0] = 1.0;
                    Point::raw(e1)
                }
            }
            _ => Point::zeros(x.len()),
        }
    }
}

impl Oracle for ToyOracle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn weak_convexity(&self) -> f64 {
        match self.kind {
            ToyKind::Abs | ToyKind::Quadratic { .. } => 0.0,
            ToyKind::AbsQuadratic => 2.0,
            ToyKind::SmoothQg => 1.0,
        }
    }

    fn lipschitz(&self) -> Option<f64> {
        match self.kind {
            ToyKind::Abs => Some(1.0),
            _ => None,
        }
    }

    fn smoothness(&self) -> Option<f64> {
        match self.kind {
            ToyKind::Quadratic { mu } => Some(mu),
            ToyKind::SmoothQg => Some(11.0),
            _ => None,
        }
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(match self.kind {
            ToyKind::SmoothQg => 1.0,
            _ => 0.0,
        })
    }

    fn value_and_subgradient(&self, x: &[f64], sub: &mut [f64]) -> f64 {
        let sq = dot(x, x);
        match self.kind {
            ToyKind::Abs => {
                let norm = sq.sqrt();
                if norm > 0.0 {
                    sub.iter_mut().zip(x).for_each(|(s, v)| *s = v / norm);
                } else {
                    sub.fill(0.0);
                }
                norm
            }
            ToyKind::AbsQuadratic => {
                let r = sq - 1.0;
                let c = 2.0 * sign(r);
                sub.iter_mut().zip(x).for_each(|(s, v)| *s = c * v);
                r.abs()
            }
            ToyKind::Quadratic { mu } => {
                sub.iter_mut().zip(x).for_each(|(s, v)| *s = mu * v);
                0.5 * mu * sq
            }
            ToyKind::SmoothQg => {
                sub.iter_mut().zip(x).for_each(|(s, v)| *s = 10.0 * v);
                sub[0] -= x[0].sin();
                5.0 * sq + x[0].cos()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> Point {
        Point::from_slice(v).unwrap()
    }

    #[test]
    fn phase_retrieval_example() {
        let inst =
            PhaseRetrievalInstance::from_data(1, vec![1.0], Some(vec![0.0]), p(&[0.0]), p(&[1.0]))
                .unwrap();
        let e = inst.evaluate(&p(&[2.0])).unwrap();
        assert_eq!((e.value, e.subgradient[0]), (4.0, 4.0));
        assert_eq!(inst.m, 2.0);
    }

    #[test]
    fn blind_deconv_example() {
        let inst = BlindDeconvInstance::from_data(
            1,
            vec![1.0],
            vec![1.0],
            Some(vec![0.0]),
            p(&[0.0, 0.0]),
            p(&[1.0, 1.0]),
            DeconvModulus::InnerProduct,
        )
        .unwrap();
        let e = inst.evaluate(&p(&[1.0, 2.0])).unwrap();
        assert_eq!(e.value, 2.0);
        assert_eq!(e.subgradient.as_slice(), &[2.0, 1.0]);
        assert_eq!(inst.weak_convexity(), 1.0);
    }

    #[test]
    fn generated_instances_interpolate() {
        let pr = gen_phase_retrieval(7, 20, 3).unwrap();
        assert_eq!(pr.evaluate(&pr.ground_truth).unwrap().value, 0.0);
        let m = 2.0 * (0..pr.n).map(|i| dot(pr.row(i), pr.row(i))).sum::<f64>() / pr.n as f64;
        assert!((pr.m - m).abs() <= 1e-12 * m);
        assert!((pr.ground_truth.norm() - 1.0).abs() < 1e-12);

        let bd = gen_blind_deconv(5, 15, 3, DeconvModulus::default()).unwrap();
        assert_eq!(bd.evaluate(&bd.ground_truth).unwrap().value, 0.0);
        assert!(bd.modulus_inner_product <= bd.modulus_norm_product);
        assert_eq!(bd.dim(), 10);
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(
            gen_phase_retrieval(4, 9, 11).unwrap(),
            gen_phase_retrieval(4, 9, 11).unwrap()
        );
        assert_ne!(
            gen_phase_retrieval(4, 9, 11).unwrap().a,
            gen_phase_retrieval(4, 9, 12).unwrap().a
        );
        assert!(gen_phase_retrieval(0, 9, 1).is_err());
        assert!(gen_blind_deconv(3, 0, 1, DeconvModulus::default()).is_err());
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pr = gen_phase_retrieval(3, 5, 1).unwrap();
        let path = dir.path().join("pr.json");
        pr.save(&path).unwrap();
        assert_eq!(PhaseRetrievalInstance::load(&path).unwrap(), pr);
        let bd = gen_blind_deconv(3, 5, 1, DeconvModulus::InnerProduct).unwrap();
        let path = dir.path().join("bd.json");
        bd.save(&path).unwrap();
        assert_eq!(BlindDeconvInstance::load(&path).unwrap(), bd);
    }

    #[test]
    fn toy_examples() {
        let aq = toy(ToyKind::AbsQuadratic, 1).unwrap();
        assert_eq!(aq.evaluate(&p(&[1.0])).unwrap().value, 0.0);
        let q = toy(ToyKind::SmoothQg, 2).unwrap();
        let e = q.evaluate(&p(&[0.0, 0.0])).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.subgradient.as_slice(), &[0.0, 0.0]);
        let abs = toy(ToyKind::Abs, 3).unwrap();
        assert_eq!(
            abs.evaluate(&p(&[0.0, 0.0, 0.0]))
                .unwrap()
                .subgradient
                .norm(),
            0.0
        );
        assert!(toy(ToyKind::Quadratic { mu: -1.0 }, 1).is_err());
        assert!(toy(ToyKind::Abs, 0).is_err());
    }

    #[test]
    fn inner_product_modulus_can_undershoot() {
        // u and v orthogonal: the declared inner-product modulus is zero, but
        // |x_1 y_2| is not convex.
        let inst = |modulus| {
            BlindDeconvInstance::from_data(
                2,
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                Some(vec![0.0]),
                p(&[0.0; 4]),
                p(&[0.0; 4]),
                modulus,
            )
            .unwrap()
        };
        let z = p(&[1.0, 0.0, 0.0, 1.0]);
        let y = p(&[2.0, 0.0, 0.0, 0.0]);
        for (modulus, holds) in [
            (DeconvModulus::InnerProduct, false),
            (DeconvModulus::NormProduct, true),
        ] {
            let bd = inst(modulus);
            let ez = bd.evaluate(&z).unwrap();
            let fy = bd.evaluate(&y).unwrap().value;
            let m = bd.weak_convexity();
            let rhs = ez.value + ez.subgradient.dot(&y.sub(&z)) - 0.5 * m * y.dist_sq(&z);
            assert_eq!(fy >= rhs - 1e-12, holds, "{modulus:?}");
        }
    }
}
