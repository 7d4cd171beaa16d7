use proxdescent::problems::{gen_phase_retrieval, toy, ToyKind};
use proxdescent::prox_descent::{run_with, ProxDescentConfig};
use proxdescent::stationarity::{
    is_to_ms_bound, moreau_reference, moreau_reference_with, qg_moreau_upper_bound, MoreauOptions,
    DEFAULT_REFERENCE_TOL,
};
use proxdescent::{Oracle, Point, RngStream};

fn p(v: &[f64]) -> Point {
    Point::from_slice(v).unwrap()
}

#[test]
fn stationary_points_of_abs_quadratic_are_fixed() {
    let f = toy(ToyKind::AbsQuadratic, 1).unwrap();
    for x in [-1.0, 0.0, 1.0] {
        let r = moreau_reference(&f, &p(&[x]), 4.0, DEFAULT_REFERENCE_TOL).unwrap();
        assert!(r.gradient.norm() <= 1e-8, "x = {x}: {:?}", r.gradient);
        assert!((r.envelope_value - r.f_x).abs() <= 1e-8);
    }
}

#[test]
fn quadratic_prox_matches_closed_form() {
    let mu = 10.0;
    let f = toy(ToyKind::Quadratic { mu }, 3).unwrap();
    let mut rng = RngStream::new(3);
    for _ in 0..20 {
        let x = rng.uniform_box(3, -2.0, 2.0);
        let rho = rng.uniform_in(0.5, 20.0);
        let r = moreau_reference(&f, &x, rho, DEFAULT_REFERENCE_TOL).unwrap();
        let exact = x.scale(rho / (mu + rho));
        let err = r.prox_point.dist_sq(&exact).sqrt();
        assert!(err <= r.prox_point_error_bound(rho, 0.0) + 1e-12);
        let value = 0.5 * mu * rho / (mu + rho) * x.norm_sq();
        assert!(r.lower_bound <= value + 1e-12 && value <= r.envelope_value + 1e-12);
    }
}

#[test]
fn envelope_gradient_matches_finite_differences() {
    let f = toy(ToyKind::SmoothQg, 3).unwrap();
    let rho = 4.0;
    let h = 1e-5;
    let envelope = |x: &Point| {
        moreau_reference(&f, x, rho, DEFAULT_REFERENCE_TOL)
            .unwrap()
            .envelope_value
    };
    let mut rng = RngStream::new(17);
    for _ in 0..100 {
        let x = rng.uniform_box(3, -2.0, 2.0);
        let grad = moreau_reference(&f, &x, rho, DEFAULT_REFERENCE_TOL)
            .unwrap()
            .gradient;
        let mut err = 0.0;
        for i in 0..3 {
            let mut e = vec![0.0; 3];
            e[i] = h;
            let fd =
                (envelope(&x.add_scaled(1.0, &e)) - envelope(&x.add_scaled(-1.0, &e))) / (2.0 * h);
            err += (fd - grad[i]).powi(2);
        }
        assert!(err.sqrt() <= 1e-4, "x = {x:?}, error {}", err.sqrt());
    }
}

#[test]
fn budget_exhaustion_is_an_error() {
    let f = gen_phase_retrieval(5, 15, 2).unwrap();
    let options = MoreauOptions {
        tol: 1e-14,
        max_iter: 3,
        ..Default::default()
    };
    assert!(moreau_reference_with(&f, &f.initial_point, f.m + 1.0, &options).is_err());
}

#[test]
fn qg_upper_bound_holds_for_references() {
    let mut rng = RngStream::new(23);
    let quad = toy(ToyKind::Quadratic { mu: 10.0 }, 2).unwrap();
    let qg = toy(ToyKind::SmoothQg, 2).unwrap();
    for _ in 0..50 {
        let w = rng.uniform_box(2, -2.0, 2.0);
        let rho = rng.uniform_in(0.5, 10.0);
        for f in [&quad, &qg] {
            let m = f.weak_convexity();
            let alpha = m + rho;
            let r = moreau_reference(f, &w, alpha, DEFAULT_REFERENCE_TOL).unwrap();
            let dist = f.distance_to_solutions(&w);
            let f_star = f.optimal_value().unwrap();
            let lambda = r.f_x - f_star - 0.5 * m * dist * dist;
            let bound = qg_moreau_upper_bound(r.f_x, lambda, dist, rho).unwrap();
            assert!(r.lower_bound <= bound + 1e-8, "{:?} at {w:?}", f.kind());
        }
    }
}

/// Every emitted `(|g~|, eps)` pair bounds the envelope gradient at the new iterate.
#[test]
fn certificates_bound_reference_gradients() {
    let check = |f: &dyn Oracle, x1: &Point, config: ProxDescentConfig, tol: f64| {
        let m = f.weak_convexity();
        let mut points = Vec::new();
        run_with(f, x1, &config, |step| {
            points.push((
                step.trial.clone(),
                step.gtilde_norm_sq().sqrt(),
                step.inexactness.max(0.0),
            ));
        })
        .unwrap();
        assert!(!points.is_empty());
        for lambda in [config.rho, 1.0] {
            let alpha = m + lambda;
            for (x, eta, eps) in &points {
                let r = moreau_reference(f, x, alpha, tol).unwrap();
                let bound = is_to_ms_bound(*eta, *eps, m, lambda).unwrap();
                let solver_err = alpha * r.prox_point_error_bound(alpha, m);
                assert!(
                    r.gradient.norm() <= bound + solver_err,
                    "{} > {bound}",
                    r.gradient.norm()
                );
            }
        }
    };
    let aq = toy(ToyKind::AbsQuadratic, 2).unwrap();
    check(
        &aq,
        &p(&[1.7, -0.4]),
        ProxDescentConfig {
            max_outer: 30,
            ..Default::default()
        },
        1e-12,
    );
    let pr = gen_phase_retrieval(3, 9, 5).unwrap();
    check(
        &pr,
        &pr.initial_point,
        ProxDescentConfig {
            rho: 2.0,
            max_outer: 30,
            ..Default::default()
        },
        1e-12,
    );
}
