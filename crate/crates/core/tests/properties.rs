use proptest::prelude::*;
use proxdescent::bundle::{initial_cut_from, Cut, EssentialModel};
use proxdescent::problems::{gen_blind_deconv, gen_phase_retrieval, toy, DeconvModulus, ToyKind};
use proxdescent::prox_descent::{run_with, ProxDescentConfig};
use proxdescent::stationarity::{
    is_to_ms_bound, moreau_reference, prox_gap_certificate, qg_moreau_upper_bound,
};
use proxdescent::{convexify, Evaluation, Oracle, Point, RngStream};

fn point(v: Vec<f64>) -> Point {
    Point::new(v).unwrap()
}

fn vec_of(dim: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, dim)
}

/// Golden-section maximization of a concave function on `[0, 1]`.
fn golden_max(f: impl Fn(f64) -> f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, 1.0);
    for _ in 0..200 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if f(c) >= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let mid = 0.5 * (a + b);
    [0.0, mid, 1.0]
        .into_iter()
        .max_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap()
}

/// A two-cut model reached by one null step: initial cut at `c`, then a cut at the first trial point.
fn two_cut_model(
    c: Vec<f64>,
    f_c: f64,
    g0: Vec<f64>,
    value: f64,
    slope: Vec<f64>,
    rho: f64,
) -> EssentialModel {
    let center = point(c);
    let first = initial_cut_from(
        &center,
        Evaluation {
            value: f_c,
            subgradient: point(g0),
        },
    );
    let mut model = EssentialModel::new(center, rho, 0.0, first).unwrap();
    let step = model.prox_step().unwrap();
    let z = step.minimizer.clone();
    let cut = Cut {
        anchor: z,
        anchor_value: value,
        slope: point(slope),
    };
    model.update(&step, cut).unwrap();
    model
}

fn model_instance() -> impl Strategy<Value = EssentialModel> {
    (1usize..8).prop_flat_map(|n| {
        (
            vec_of(n, -3.0, 3.0),
            -5.0..5.0,
            vec_of(n, -3.0, 3.0),
            -5.0..5.0,
            vec_of(n, -3.0, 3.0),
            0.05..20.0,
        )
            .prop_map(|(c, f, g0, v, s, rho)| two_cut_model(c, f, g0, v, s, rho))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn prox_step_matches_dual_search(model in model_instance()) {
        let out = model.prox_step().unwrap();
        prop_assert!((0.0..=1.0).contains(&out.theta));
        let c = model.center();
        let (a, b) = (model.aggregate_cut(), model.newest_cut());
        let (va, vb) = (a.value_at(c), b.value_at(c));
        let rho = model.rho();
        let mix = |t: f64| -> Vec<f64> {
            a.slope.iter().zip(b.slope.iter()).map(|(s, g)| (1.0 - t) * s + t * g).collect()
        };
        let dual = |t: f64| {
            let v = mix(t);
            (1.0 - t) * va + t * vb - v.iter().map(|x| x * x).sum::<f64>() / (2.0 * rho)
        };
        let t = golden_max(dual);
        let y: Vec<f64> = c.iter().zip(mix(t)).map(|(ci, vi)| ci - vi / rho).collect();
        let scale = 1f64.max(out.optimal_value.abs());
        prop_assert!((dual(t) - out.optimal_value).abs() <= 1e-8 * scale);
        let err = y.iter().zip(out.minimizer.iter()).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-6 * (1.0 + y.iter().map(|v| v * v).sum::<f64>().sqrt()));
    }

    #[test]
    fn prox_step_value_is_the_subproblem_minimum(model in model_instance(), seed in any::<u64>()) {
        let out = model.prox_step().unwrap();
        let c = model.center();
        let rho = model.rho();
        let objective = |y: &Point| model.value_at(y) + 0.5 * rho * y.dist_sq(c);
        prop_assert!((objective(&out.minimizer) - out.optimal_value).abs() <= 1e-9 * (1.0 + out.optimal_value.abs()));
        let mut rng = RngStream::new(seed);
        for _ in 0..20 {
            let dir = rng.unit_sphere(c.dim()).unwrap();
            let y = out.minimizer.add_scaled(rng.uniform_in(1e-3, 1.0), &dir);
            prop_assert!(objective(&y) >= out.optimal_value - 1e-9 * (1.0 + out.optimal_value.abs()));
        }
    }

    #[test]
    fn convexified_oracle_identity(
        (c, y) in (1usize..6).prop_flat_map(|n| (vec_of(n, -2.0, 2.0), vec_of(n, -2.0, 2.0)))
    ) {
        let f = toy(ToyKind::AbsQuadratic, c.len()).unwrap();
        let center = point(c);
        let y = point(y);
        let base = f.evaluate(&y).unwrap();
        let conv = convexify(&f, &center).unwrap();
        let e = conv.evaluate(&y).unwrap();
        prop_assert_eq!(conv.weak_convexity(), 0.0);
        prop_assert!((e.value - (base.value + y.dist_sq(&center))).abs() <= 1e-12 * (1.0 + e.value.abs()));
        for i in 0..y.dim() {
            let expect = base.subgradient[i] + 2.0 * (y[i] - center[i]);
            prop_assert!((e.subgradient[i] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn envelope_minorizes_and_brackets(x in vec_of(2, -2.0, 2.0), rho in 2.5..10.0) {
        let f = toy(ToyKind::AbsQuadratic, 2).unwrap();
        let x = point(x);
        let r = moreau_reference(&f, &x, rho, 1e-10).unwrap();
        prop_assert!(r.lower_bound <= r.envelope_value + 1e-12 * (1.0 + r.envelope_value.abs()), "{} > {}", r.lower_bound, r.envelope_value);
        prop_assert!(r.envelope_value - r.lower_bound <= 1e-10);
        prop_assert!(r.envelope_value <= r.f_x + 1e-10);
    }

    #[test]
    fn conversion_bounds_are_monotone(eta in 0.0..1.0, eps in 0.0..1.0, m in 0.0..5.0, lambda in 0.1..5.0, bump in 0.0..1.0) {
        let base = is_to_ms_bound(eta, eps, m, lambda).unwrap();
        prop_assert!(is_to_ms_bound(eta + bump, eps, m, lambda).unwrap() >= base);
        prop_assert!(is_to_ms_bound(eta, eps + bump, m, lambda).unwrap() >= base);
        let cert = prox_gap_certificate(eps, lambda, m).unwrap();
        prop_assert!((cert.eta * cert.eta - 2.0 * lambda * eps).abs() <= 1e-12 * (1.0 + eps));
        prop_assert_eq!(cert.eps, eps);
    }

    #[test]
    fn qg_bound_never_exceeds_f(f_w in 0.0..10.0, lambda in 0.0..10.0, dist in 0.01..5.0, rho in 0.01..10.0) {
        let bound = qg_moreau_upper_bound(f_w, lambda, dist, rho).unwrap();
        prop_assert!(bound <= f_w + 1e-12);
    }

    #[test]
    fn streams_are_reproducible(seed in any::<u64>(), cell in 0u64..1000) {
        let a: Vec<f64> = (0..8).map({ let mut r = RngStream::for_cell(seed, cell); move |_| r.standard_normal() }).collect();
        let b: Vec<f64> = (0..8).map({ let mut r = RngStream::for_cell(seed, cell); move |_| r.standard_normal() }).collect();
        let c: Vec<f64> = (0..8).map({ let mut r = RngStream::for_cell(seed, cell + 1); move |_| r.standard_normal() }).collect();
        prop_assert_eq!(&a, &b);
        prop_assert_ne!(&a, &c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn inner_loops_improve_monotonically(seed in 0u64..1000, beta in 0.1..0.9, rho in 0.1..10.0) {
        let f = gen_phase_retrieval(4, 12, seed).unwrap();
        let config = ProxDescentConfig { beta, rho, max_outer: 15, ..Default::default() };
        let mut ok = true;
        run_with(&f, &f.initial_point, &config, |step| {
            for w in step.trace.records.windows(2) {
                let (a, b) = (&w[0], &w[1]);
                let gain = if b.slope_diff_sq > 0.0 {
                    (a.gap).min(rho * a.gap * a.gap / b.slope_diff_sq)
                } else {
                    a.gap
                };
                let slack = 1e-10 * (1.0 + a.eta.abs());
                ok &= b.eta >= a.eta - slack;
                ok &= b.eta >= a.eta + 0.5 * gain - slack;
            }
        }).unwrap();
        prop_assert!(ok);
    }
}

/// Counts violations of `f(y) >= f(z) + <g, y - z> - (m/2)|y - z|^2` on random pairs in a box.
fn minorant_violations<O: Oracle>(f: &O, pairs: usize, half_width: f64, seed: u64) -> usize {
    let mut rng = RngStream::new(seed);
    let n = f.dim();
    let m = f.weak_convexity();
    (0..pairs)
        .filter(|_| {
            let z = rng.uniform_box(n, -half_width, half_width);
            let y = rng.uniform_box(n, -half_width, half_width);
            let ez = f.evaluate(&z).unwrap();
            let fy = f.evaluate(&y).unwrap().value;
            let rhs = ez.value + ez.subgradient.dot(&y.sub(&z)) - 0.5 * m * y.dist_sq(&z);
            fy < rhs - 1e-9 * (1.0 + fy.abs().max(rhs.abs()))
        })
        .count()
}

#[test]
fn declared_moduli_pass_minorant_sampling() {
    for seed in 0..5 {
        let pr = gen_phase_retrieval(6, 18, seed).unwrap();
        assert_eq!(minorant_violations(&pr, 1000, 2.0, seed), 0);
        let bd = gen_blind_deconv(6, 18, seed, DeconvModulus::NormProduct).unwrap();
        assert_eq!(minorant_violations(&bd, 1000, 2.0, seed), 0);
        let bd = gen_blind_deconv(6, 18, seed, DeconvModulus::InnerProduct).unwrap();
        assert_eq!(minorant_violations(&bd, 1000, 2.0, seed), 0);
    }
    for kind in [
        ToyKind::Abs,
        ToyKind::AbsQuadratic,
        ToyKind::Quadratic { mu: 10.0 },
        ToyKind::SmoothQg,
    ] {
        for dim in [1, 3] {
            assert_eq!(
                minorant_violations(&toy(kind, dim).unwrap(), 1000, 2.0, 9),
                0,
                "{kind:?}"
            );
        }
    }
}

#[test]
fn box_lipschitz_estimate_bounds_sampled_slopes() {
    let pr = gen_phase_retrieval(5, 15, 4).unwrap();
    let mut rng = RngStream::new(1);
    let estimate = pr.box_lipschitz_estimate(2.0, 500, &mut rng);
    assert!(estimate > 0.0 && estimate.is_finite());
    let abs = toy(ToyKind::Abs, 3).unwrap();
    let mut rng = RngStream::new(2);
    for _ in 0..100 {
        let x = rng.uniform_box(3, -2.0, 2.0);
        assert!(abs.evaluate(&x).unwrap().subgradient.norm() <= abs.lipschitz().unwrap() + 1e-12);
    }
}
