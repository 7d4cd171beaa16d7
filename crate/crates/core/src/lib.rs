//! Proximal descent for weakly convex, possibly nonsmooth, minimization.
//!
//! The method runs an inexact proximal point outer loop. Each outer step is
//! realized by a convex proximal bundle inner loop on the convexified function
//! `f(.) + (m/2)|. - x_k|^2`, using the two-cut essential model whose proximal
//! subproblem has a closed-form solution. Every accepted step comes with an
//! `(eta, eps)`-inexact stationarity certificate `(g_tilde, eps)`.
//!
//! Besides the solver, the crate provides:
//!
//! * [`baselines`]: the subgradient method, an exact proximal point method and
//!   a deterministic proximally guided subgradient method,
//! * [`stationarity`]: a certified Moreau envelope reference solver and the
//!   conversions between stationarity notions,
//! * [`problems`]: phase retrieval, blind deconvolution and toy test functions.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bundle;
pub mod error;
pub mod oracle;
pub mod point;
pub mod problems;
pub mod prox_descent;
pub mod rng;
pub mod stationarity;

pub use error::{Error, Result};
pub use oracle::{convexify, Convexified, Evaluation, FnOracle, Oracle};
pub use point::Point;
pub use rng::RngStream;
