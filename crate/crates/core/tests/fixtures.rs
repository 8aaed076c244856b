//! Fixture problems exercised end to end: verdicts, witnesses, curves,
//! and the sampling probe must all tell the same story about each
//! candidate point.

use kktcheck::expr::{eval_gradient, eval_value, parse_problem_file, ProblemSpec};
use kktcheck::kkt::{active_set, kkt_report, ActiveSet, Tolerances, Verdict};
use kktcheck::linalg::norm2;
use kktcheck::oracle::local_min_probe;
use kktcheck::witness::{
    constraint_curve, descent_witness, directional_slope, sign_witness, NewtonConfig,
};

fn tols() -> Tolerances {
    Tolerances::default()
}

fn cfg() -> NewtonConfig {
    NewtonConfig::default()
}

fn active(p: &ProblemSpec, x: &[f64]) -> ActiveSet {
    active_set(p, x, tols().active).unwrap()
}

fn circle() -> ProblemSpec {
    parse_problem_file("vars 2\nminimize x0 + x1\neq x0^2 + x1^2 - 2\npoint -1 -1").unwrap()
}

fn halfspace() -> ProblemSpec {
    parse_problem_file("vars 2\nminimize x0^2 + x1^2\nineq 1 - x0\npoint 1 0").unwrap()
}

fn ball_max() -> ProblemSpec {
    parse_problem_file("vars 2\nminimize x0\nineq x0^2 + x1^2 - 1\npoint 1 0").unwrap()
}

fn orthant() -> ProblemSpec {
    parse_problem_file("vars 2\nminimize x0 + x1\nineq -x0\nineq -x1\npoint 0 0").unwrap()
}

fn min_x1_circle() -> ProblemSpec {
    parse_problem_file("vars 2\nminimize x1\neq x0^2 + x1^2 - 2\npoint 1 1").unwrap()
}

/// Mixed equality + inactive inequality with a KKT point at (0.5, 1.5).
fn mixed() -> ProblemSpec {
    parse_problem_file(
        "vars 2\nminimize (x0 - 1)^2 + (x1 - 2)^2\neq x0 + x1 - 2\nineq -x0\npoint 0.5 1.5",
    )
    .unwrap()
}

fn feasible_and_below(p: &ProblemSpec, point: &[f64], objective_bound: f64) {
    // re-verification through plain expression evaluation only
    let n = p.n_equalities();
    for i in 1..=p.constraint_count() {
        let v = eval_value(p.constraint(i), point).unwrap();
        if i <= n {
            assert!(v.abs() <= 1e-8, "equality {i} violated: {v}");
        } else {
            assert!(v <= 1e-8, "inequality {i} violated: {v}");
        }
    }
    let f0 = eval_value(p.objective(), point).unwrap();
    assert!(f0 < objective_bound, "objective {f0} not below {objective_bound}");
}

#[test]
fn certified_points_survive_the_probe() {
    // verdict KKT_SATISFIED with strict multipliers and LICQ: the probe
    // must come back empty-handed
    for (p, x) in [
        (circle(), vec![-1.0, -1.0]),
        (halfspace(), vec![1.0, 0.0]),
        (orthant(), vec![0.0, 0.0]),
        (mixed(), vec![0.5, 1.5]),
    ] {
        let report = kkt_report(&p, &x, &tols()).unwrap();
        assert_eq!(report.verdict, Verdict::KktSatisfied);
        let a = active(&p, &x);
        let probe = local_min_probe(&p, &x, &a, 0.05, 10_000, 2024, &tols(), &cfg()).unwrap();
        assert!(
            probe.counterexample.is_none(),
            "probe refuted a certified point: {:?}",
            probe.counterexample
        );
    }
}

#[test]
fn sign_failure_is_backed_by_witness_and_probe() {
    let p = ball_max();
    let x = [1.0, 0.0];
    let report = kkt_report(&p, &x, &tols()).unwrap();
    assert_eq!(report.verdict, Verdict::SignFail);
    let f0 = eval_value(p.objective(), &x).unwrap();

    let a = active(&p, &x);
    let witness = sign_witness(&p, &x, &a, 1, &tols(), &cfg()).unwrap();
    feasible_and_below(&p, &witness.x, f0);

    let probe = local_min_probe(&p, &x, &a, 0.1, 10_000, 2024, &tols(), &cfg()).unwrap();
    let counter = probe.counterexample.expect("probe should refute the maximizer");
    feasible_and_below(&p, &counter.point, f0);
}

#[test]
fn stationarity_failure_is_backed_by_descent_witness() {
    let p = min_x1_circle();
    let x = [1.0, 1.0];
    let report = kkt_report(&p, &x, &tols()).unwrap();
    assert_eq!(report.verdict, Verdict::StationarityFail);
    let f0 = eval_value(p.objective(), &x).unwrap();

    let a = active(&p, &x);
    for nu in [1e-2, 1e-3, 1e-4] {
        let witness = descent_witness(&p, &x, &a, nu, &tols(), &cfg()).unwrap();
        assert_eq!(witness.nu, nu, "no halving expected at these sizes");
        assert!(
            (witness.objective_drop - nu).abs() <= 1e-9 * (1.0 + f0.abs()),
            "drop {} for requested {nu}",
            witness.objective_drop
        );
        assert!(witness.max_constraint_violation <= 1e-9);
        assert!(witness.newton_iters <= 10);
        feasible_and_below(&p, &witness.x_nu, f0);
    }
}

#[test]
fn multiplier_cross_checks_along_curves() {
    // finite-difference slope and the analytic pairing both re-derive the
    // least-squares multiplier of the relaxed constraint
    for (p, x, j0, expected_mu) in [
        (ball_max(), vec![1.0, 0.0], 1usize, -0.5),
        (halfspace(), vec![1.0, 0.0], 1, 2.0),
        (orthant(), vec![0.0, 0.0], 1, 1.0),
        (orthant(), vec![0.0, 0.0], 2, 1.0),
    ] {
        let a = active(&p, &x);
        let curve = constraint_curve(&p, &x, &a, j0, &[0.0, 1e-5], &cfg()).unwrap();
        let slope = directional_slope(&p, &curve).unwrap();
        assert!(
            (slope.finite_difference - expected_mu).abs() <= 1e-4,
            "fd slope {} vs mu {expected_mu}",
            slope.finite_difference
        );
        assert!(
            (slope.analytic - expected_mu).abs() <= 1e-8,
            "analytic slope {} vs mu {expected_mu}",
            slope.analytic
        );
    }
}

#[test]
fn slopes_at_certified_points_are_nonnegative() {
    // strict minimizers with active inequalities: every relaxation curve
    // climbs (or at worst stays level within tolerance)
    for (p, x, inequalities) in [
        (halfspace(), vec![1.0, 0.0], vec![1usize]),
        (orthant(), vec![0.0, 0.0], vec![1, 2]),
    ] {
        let a = active(&p, &x);
        for j0 in inequalities {
            let curve = constraint_curve(&p, &x, &a, j0, &[0.0, 1e-5], &cfg()).unwrap();
            let slope = directional_slope(&p, &curve).unwrap();
            assert!(
                slope.finite_difference >= -1e-6,
                "descending slope {} along inequality {j0}",
                slope.finite_difference
            );
        }
    }
}

#[test]
fn sign_witness_refuses_at_certified_points() {
    for (p, x, inequalities) in [
        (halfspace(), vec![1.0, 0.0], vec![1usize]),
        (orthant(), vec![0.0, 0.0], vec![1, 2]),
    ] {
        let a = active(&p, &x);
        for j0 in inequalities {
            assert!(sign_witness(&p, &x, &a, j0, &tols(), &cfg()).is_err());
        }
    }
}

#[test]
fn reported_multipliers_recheck_by_direct_evaluation() {
    // rebuild f0' + Σ λ_i fi' + Σ μ_j f_{n+j}' from the report's own
    // multipliers, independently of the least-squares path
    for (p, x) in [
        (circle(), vec![-1.0, -1.0]),
        (halfspace(), vec![1.0, 0.0]),
        (orthant(), vec![0.0, 0.0]),
        (mixed(), vec![0.5, 1.5]),
    ] {
        let r = kkt_report(&p, &x, &tols()).unwrap();
        assert_eq!(r.verdict, Verdict::KktSatisfied);
        let m = r.multipliers.as_ref().unwrap();
        let (_, g0) = eval_gradient(p.objective(), &x).unwrap();
        let mut acc = g0.clone();
        let n = p.n_equalities();
        for (i, &lam) in m.lambda.iter().enumerate() {
            let (_, g) = eval_gradient(p.constraint(i + 1), &x).unwrap();
            for (a, gi) in acc.iter_mut().zip(&g) {
                *a += lam * gi;
            }
        }
        for (j, &mu) in m.mu.iter().enumerate() {
            let (_, g) = eval_gradient(p.constraint(n + j + 1), &x).unwrap();
            for (a, gi) in acc.iter_mut().zip(&g) {
                *a += mu * gi;
            }
        }
        let threshold = tols().stationarity_threshold(norm2(&g0));
        assert!(norm2(&acc) <= threshold, "direct residual {}", norm2(&acc));
        assert!(m.mu.iter().all(|&v| v >= -tols().sign));
    }
}

#[test]
fn permuting_constraints_permutes_multipliers() {
    let p1 = parse_problem_file(
        "vars 3\nminimize x0 + x1 + x2\neq x0^2 + x1^2 - 2\neq x2",
    )
    .unwrap();
    let p2 = parse_problem_file(
        "vars 3\nminimize x0 + x1 + x2\neq x2\neq x0^2 + x1^2 - 2",
    )
    .unwrap();
    let x = [-1.0, -1.0, 0.0];
    let r1 = kkt_report(&p1, &x, &tols()).unwrap();
    let r2 = kkt_report(&p2, &x, &tols()).unwrap();
    assert_eq!(r1.verdict, r2.verdict);
    let m1 = r1.multipliers.unwrap();
    let m2 = r2.multipliers.unwrap();
    assert!((m1.lambda[0] - m2.lambda[1]).abs() <= 1e-12);
    assert!((m1.lambda[1] - m2.lambda[0]).abs() <= 1e-12);
    assert!(
        (r1.stationarity_residual.unwrap() - r2.stationarity_residual.unwrap()).abs() <= 1e-12
    );
}

#[test]
fn adding_an_inactive_inequality_changes_nothing() {
    let bare = parse_problem_file("vars 2\nminimize x0 + x1\neq x0^2 + x1^2 - 2").unwrap();
    let padded = parse_problem_file(
        "vars 2\nminimize x0 + x1\neq x0^2 + x1^2 - 2\nineq x0 - 100",
    )
    .unwrap();
    let x = [-1.0, -1.0];
    let r_bare = kkt_report(&bare, &x, &tols()).unwrap();
    let r_padded = kkt_report(&padded, &x, &tols()).unwrap();
    assert_eq!(r_bare.verdict, r_padded.verdict);
    let m_bare = r_bare.multipliers.unwrap();
    let m_padded = r_padded.multipliers.unwrap();
    // identical bits: same active family, same solve
    assert_eq!(m_bare.lambda[0], m_padded.lambda[0]);
    assert_eq!(m_padded.mu[0], 0.0);
    assert_eq!(r_padded.complementarity[0], 0.0);
    assert_eq!(
        r_bare.stationarity_residual.unwrap(),
        r_padded.stationarity_residual.unwrap()
    );
}

#[test]
fn jacobian_identity_holds_on_all_fixture_maps() {
    use kktcheck::witness::{descent_map, tangent_map};
    let fixtures: Vec<(ProblemSpec, Vec<f64>)> = vec![
        (circle(), vec![-1.0, -1.0]),
        (halfspace(), vec![1.0, 0.0]),
        (ball_max(), vec![1.0, 0.0]),
        (orthant(), vec![0.0, 0.0]),
        (min_x1_circle(), vec![1.0, 1.0]),
        (mixed(), vec![0.5, 1.5]),
    ];
    for (p, x) in &fixtures {
        let a = active(p, x);
        if !a.is_empty() {
            let map = tangent_map(p, x, &a).unwrap();
            assert!(map.identity_deviation().unwrap() <= 1e-8);
        }
        if let Ok(map) = descent_map(p, x, &a) {
            assert!(map.identity_deviation().unwrap() <= 1e-8);
        }
    }
}

#[test]
fn five_dimensional_sphere_runs_the_whole_pipeline() {
    let p = parse_problem_file(
        "vars 5\nminimize x0 + x1 + x2 + x3 + x4\neq x0^2 + x1^2 + x2^2 + x3^2 + x4^2 - 5",
    )
    .unwrap();

    // the symmetric point minimizes; λ = 0.5 as on the circle
    let x_min = [-1.0; 5];
    let r = kkt_report(&p, &x_min, &tols()).unwrap();
    assert_eq!(r.verdict, Verdict::KktSatisfied);
    assert!((r.multipliers.unwrap().lambda[0] - 0.5).abs() <= 1e-8);
    let a = active(&p, &x_min);
    let probe = local_min_probe(&p, &x_min, &a, 0.05, 5_000, 11, &tols(), &cfg()).unwrap();
    assert!(probe.counterexample.is_none());

    // a feasible non-stationary point gets refuted by a descent witness
    let x_bad = [1.0, -1.0, -1.0, -1.0, 1.0];
    let r = kkt_report(&p, &x_bad, &tols()).unwrap();
    assert_eq!(r.verdict, Verdict::StationarityFail);
    let a = active(&p, &x_bad);
    let f0 = eval_value(p.objective(), &x_bad).unwrap();
    let w = descent_witness(&p, &x_bad, &a, 1e-3, &tols(), &cfg()).unwrap();
    assert!((w.objective_drop - 1e-3).abs() <= 1e-9);
    feasible_and_below(&p, &w.x_nu, f0);
}

#[test]
fn descent_witness_respects_the_domain_box() {
    // minimizing x0 with no constraints but a box: the witness must stay
    // strictly inside, shrinking nu as needed
    let p = parse_problem_file("vars 1\nminimize x0\nbox 0 -0.05 10").unwrap();
    let x = [0.0];
    let a = active(&p, &x);
    let w = descent_witness(&p, &x, &a, 1.0, &tols(), &cfg()).unwrap();
    assert!(w.nu < 1.0, "nu should have been halved");
    assert!(w.x_nu[0] > -0.05);
    assert!(w.objective_drop > 0.0);
}
