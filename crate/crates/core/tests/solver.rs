use proxdescent::baselines::{pgsg, ppm, subgradient_method, StepSchedule};
use proxdescent::problems::{gen_blind_deconv, gen_phase_retrieval, toy, DeconvModulus, ToyKind};
use proxdescent::prox_descent::{run, run_with, ProxDescentConfig, SolveReport, Termination};
use proxdescent::stationarity::{moreau_reference, DEFAULT_REFERENCE_TOL};
use proxdescent::{Oracle, Point, RngStream};

fn p(v: &[f64]) -> Point {
    Point::from_slice(v).unwrap()
}

/// Summed descent inequalities over a run: the squared inexact subgradients and
/// the inexactness values are paid for by the total decrease in `f`.
fn check_telescoping(report: &SolveReport) {
    let (m, beta, alpha) = (report.m, report.beta, report.alpha);
    let decrease = report.f_initial - report.final_value;
    let g_sum: f64 = report.iterates.iter().map(|r| r.gtilde_norm_sq).sum();
    let eps_sum: f64 = report.iterates.iter().map(|r| r.inexactness).sum();
    let slack = 1e-9 * (1.0 + report.f_initial.abs()) * report.iterates.len().max(1) as f64;
    assert!(
        g_sum <= decrease * 2.0 * alpha * alpha / (m + beta * report.rho) + slack * alpha * alpha
    );
    assert!(
        eps_sum <= (1.0 - beta) / beta * (decrease - m / (2.0 * alpha * alpha) * g_sum) + slack
    );
}

#[test]
fn abs_runs_certify_and_telescope() {
    let f = toy(ToyKind::Abs, 4).unwrap();
    let x1 = p(&[1.0, -2.0, 0.5, 3.0]);
    let config = ProxDescentConfig {
        eta_target: 1e-6,
        eps_target: 1e-8,
        ..Default::default()
    };
    let report = run(&f, &x1, &config).unwrap();
    assert!(matches!(report.termination, Termination::Certified { .. }));
    assert!(report
        .iterates
        .windows(2)
        .all(|w| w[1].f_value <= w[0].f_value));
    check_telescoping(&report);
}

#[test]
fn descent_inequalities_hold_per_step() {
    let f = gen_phase_retrieval(8, 24, 3).unwrap();
    let config = ProxDescentConfig {
        max_outer: 60,
        ..Default::default()
    };
    let report = run(&f, &f.initial_point, &config).unwrap();
    let (m, beta, rho, alpha) = (report.m, report.beta, report.rho, report.alpha);
    for r in &report.iterates {
        let slack = 1e-9 * (1.0 + r.f_center.abs());
        let g2 = r.gtilde_norm_sq;
        assert!(r.f_value <= r.f_center - (m + beta * rho) / (2.0 * alpha * alpha) * g2 + slack);
        assert!(
            r.inexactness
                <= (1.0 - beta) / beta * (r.f_center - r.f_value - m / (2.0 * alpha * alpha) * g2)
                    + slack
        );
        assert!(r.inexactness >= -1e-12);
    }
    check_telescoping(&report);
}

#[test]
fn inexact_subgradients_are_certificates() {
    let f = gen_blind_deconv(4, 12, 8, DeconvModulus::NormProduct).unwrap();
    let m = f.weak_convexity();
    let config = ProxDescentConfig {
        rho: 2.0,
        max_outer: 30,
        ..Default::default()
    };
    let mut steps = Vec::new();
    run_with(&f, &f.initial_point, &config, |s| steps.push(s.clone())).unwrap();
    let mut rng = RngStream::new(4);
    for s in steps.iter().step_by(3) {
        for _ in 0..200 {
            let y = rng.uniform_box(f.dim(), -2.0, 2.0);
            let fy = f.evaluate(&y).unwrap().value;
            let lhs = fy + 0.5 * m * y.dist_sq(&s.trial);
            let rhs = s.f_trial + s.gtilde.dot(&y.sub(&s.trial)) - s.inexactness;
            assert!(lhs >= rhs - 1e-8 * (1.0 + lhs.abs()));
        }
    }
}

#[test]
fn cut_slopes_respect_the_lipschitz_bound() {
    let f = toy(ToyKind::Abs, 3).unwrap();
    for rho in [0.1, 1.0, 10.0] {
        let config = ProxDescentConfig {
            rho,
            max_outer: 50,
            ..Default::default()
        };
        let mut worst: f64 = 0.0;
        run_with(&f, &p(&[3.0, -1.0, 2.0]), &config, |s| {
            worst = worst.max(s.max_slope_norm())
        })
        .unwrap();
        assert!(worst <= 1.0 + 1e-9, "rho = {rho}: {worst}");
    }
}

#[test]
fn inner_loops_respect_the_iteration_bound() {
    let f = toy(ToyKind::AbsQuadratic, 1).unwrap();
    let config = ProxDescentConfig {
        max_outer: 40,
        ..Default::default()
    };
    let (beta, rho) = (config.beta, config.rho);
    let alpha = config.alpha(f.weak_convexity());
    for x1 in [-1.9, -0.6, 0.3, 1.4, 2.0] {
        let mut steps = Vec::new();
        run_with(&f, &p(&[x1]), &config, |s| steps.push(s.clone())).unwrap();
        for s in &steps {
            let r = moreau_reference(&f, &s.center, alpha, DEFAULT_REFERENCE_TOL).unwrap();
            let delta = s.f_center - r.lower_bound;
            if delta <= 0.0 {
                continue;
            }
            let g = s.max_slope_norm();
            let bound = 8.0 * g * g / ((1.0 - beta).powi(2) * rho * delta) + 1.0;
            assert!(s.inner_iterations as f64 <= bound);
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let f = gen_phase_retrieval(6, 18, 12).unwrap();
    let config = ProxDescentConfig {
        max_outer: 25,
        ..Default::default()
    };
    let a = run(&f, &f.initial_point, &config).unwrap();
    let b = run(&f, &f.initial_point, &config).unwrap();
    assert_eq!(a, b);
}

#[test]
fn quadratic_growth_gives_linear_decay() {
    let f = toy(ToyKind::Quadratic { mu: 10.0 }, 3).unwrap();
    let config = ProxDescentConfig {
        eta_target: 0.0,
        eps_target: 0.0,
        max_outer: 200,
        ..Default::default()
    };
    let report = run(&f, &p(&[1.0, -1.0, 0.5]), &config).unwrap();
    let (beta, rho, mu) = (config.beta, config.rho, 10.0);
    let kappa = f64::min(0.5, mu / (4.0 * rho));
    let rate = 1.0 - beta * kappa;
    let mut prev = report.f_initial;
    for r in &report.iterates {
        if prev <= 1e-12 {
            break;
        }
        assert!(r.f_value / prev <= rate + 1e-9);
        prev = r.f_value;
    }
    assert!(report.final_value <= 1e-10);
}

#[test]
fn subgradient_method_meets_its_rate() {
    let f = toy(ToyKind::AbsQuadratic, 1).unwrap();
    let m = f.weak_convexity();
    let x1 = p(&[1.8]);
    let lipschitz = 4.0;
    let horizon = 400;
    let delta = moreau_reference(&f, &x1, 2.0 * m, DEFAULT_REFERENCE_TOL)
        .unwrap()
        .envelope_value;
    let schedule = StepSchedule::HorizonConstant {
        delta,
        m,
        lipschitz,
        horizon,
    };
    let report = subgradient_method(&f, &x1, &schedule, horizon).unwrap();
    assert_eq!(report.records.len(), horizon + 1);
    let mut best = f64::INFINITY;
    for x in &report.points[..horizon] {
        assert!(f.evaluate(x).unwrap().subgradient.norm() <= lipschitz);
        let r = moreau_reference(&f, x, 2.0 * m, DEFAULT_REFERENCE_TOL).unwrap();
        best = best.min(r.gradient.norm_sq());
    }
    assert!(best <= (2.0 * m * delta * lipschitz * lipschitz / (horizon as f64 + 1.0)).sqrt());
}

#[test]
fn ppm_meets_its_rate() {
    let f = toy(ToyKind::AbsQuadratic, 1).unwrap();
    let alpha = 4.0;
    let x1 = p(&[1.7]);
    let t = 50;
    let report = ppm(&f, &x1, alpha, t, DEFAULT_REFERENCE_TOL).unwrap();
    let f1 = f.evaluate(&x1).unwrap().value;
    let best = report
        .records
        .iter()
        .filter_map(|r| r.moreau_grad_norm_sq)
        .fold(f64::INFINITY, f64::min);
    assert!(best <= 2.0 * alpha * f1 / t as f64 * (1.0 + 1e-6));
}

#[test]
fn pgsg_uses_exactly_its_budget() {
    let f = gen_phase_retrieval(5, 15, 1).unwrap();
    let report = pgsg(&f, &f.initial_point, 1.0, 7, 11, false).unwrap();
    assert_eq!(report.evaluations, 77);
    assert_eq!(report.records.len(), 7);
    assert_eq!(report.points.len(), 8);
    let first = report.records.first().unwrap().f_value;
    let last = report.records.last().unwrap().f_value;
    assert!(last < first);
}
