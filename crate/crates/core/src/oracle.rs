//! Independent brute-force checks for the analytic pipeline.
//!
//! Nothing here shares code with the forward-mode or dual-basis paths it
//! audits: gradients come from central differences, and local minimality
//! is probed by sampling a ball around the candidate, projecting each
//! sample onto the active surface, and hunting for a feasible point with a
//! strictly lower objective.
//!
//! The probe is deterministic: sample i draws from ChaCha8 seeded with the
//! probe seed on stream i, and the reduction picks the smallest objective
//! with ties broken by the lowest sample index. The parallel path (feature
//! `parallel`, on by default) is bit-identical to the sequential one.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{eval_value, EvalError, Expr, ProblemSpec};
use crate::kkt::{active_gradient_matrix, feasibility_check, ActiveSet, KktError, Tolerances};
use crate::linalg::{least_squares_min_norm, norm2};
use crate::witness::NewtonConfig;

/// Identifier for the probe's generator and draw order, recorded in every
/// report so runs can be reproduced elsewhere.
pub const PROBE_RNG: &str = "chacha8(seed; stream=sample): d normals, 1 uniform";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("projection onto the active surface did not converge (residual {residual:.3e})")]
    NoConvergence { residual: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Kkt(#[from] KktError),
}

/// Central-difference gradient of `e` at `x` with step `h`.
pub fn finite_diff_gradient(e: &Expr, x: &[f64], h: f64) -> Result<Vec<f64>, OracleError> {
    assert!(h > 0.0, "step must be positive");
    let mut gradient = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for k in 0..x.len() {
        probe[k] = x[k] + h;
        let plus = eval_value(e, &probe)?;
        probe[k] = x[k] - h;
        let minus = eval_value(e, &probe)?;
        probe[k] = x[k];
        gradient.push((plus - minus) / (2.0 * h));
    }
    Ok(gradient)
}

/// Gauss-Newton projection of `x0` onto the surface where every active
/// constraint vanishes: iterate `x ← x − Gᵀ(GGᵀ)⁻¹ F(x)` with G the active
/// gradient rows, until max |f_i(x)| ≤ cfg.tol_residual.
pub fn project_feasible(
    p: &ProblemSpec,
    x0: &[f64],
    active: &ActiveSet,
    cfg: &NewtonConfig,
) -> Result<Vec<f64>, OracleError> {
    let mut x = x0.to_vec();
    if active.is_empty() {
        return Ok(x);
    }
    let mut residual = active_values_inf(p, active, &x)?;
    if residual <= cfg.tol_residual {
        return Ok(x);
    }
    for _ in 0..cfg.max_iters {
        let g = active_gradient_matrix(p, &x, active)?;
        let values: Result<Vec<f64>, EvalError> = active
            .indices
            .iter()
            .map(|&i| eval_value(p.constraint(i), &x))
            .collect();
        let step = least_squares_min_norm(&g, &values?);
        for (xi, si) in x.iter_mut().zip(&step) {
            *xi -= si;
        }
        residual = active_values_inf(p, active, &x)?;
        if residual <= cfg.tol_residual {
            return Ok(x);
        }
    }
    Err(OracleError::NoConvergence { residual })
}

fn active_values_inf(p: &ProblemSpec, active: &ActiveSet, x: &[f64]) -> Result<f64, OracleError> {
    let mut worst = 0.0_f64;
    for &index in &active.indices {
        worst = worst.max(eval_value(p.constraint(index), x)?.abs());
    }
    Ok(worst)
}

/// A feasible sampled point strictly below the candidate objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub point: Vec<f64>,
    pub objective: f64,
    pub sample_index: usize,
}

/// Outcome of a local minimality probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub samples_tested: usize,
    pub counterexample: Option<Counterexample>,
    /// Lowest feasible objective seen, including the candidate itself.
    pub best_feasible_value: f64,
    pub radius: f64,
    pub seed: u64,
    /// Generator identifier, for reproducing the run elsewhere.
    pub rng: String,
}

struct FeasibleSample {
    index: usize,
    point: Vec<f64>,
    objective: f64,
}

/// One deterministic sample: a uniform draw in the ball, projected onto
/// the active surface, kept only if fully feasible.
#[allow(clippy::too_many_arguments)]
fn evaluate_sample(
    p: &ProblemSpec,
    x: &[f64],
    active: &ActiveSet,
    radius: f64,
    seed: u64,
    index: usize,
    tols: &Tolerances,
    cfg: &NewtonConfig,
) -> Option<FeasibleSample> {
    let d = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut direction: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let u: f64 = rng.gen();
    let len = norm2(&direction);
    if len > 0.0 {
        let scale = radius * u.powf(1.0 / d as f64) / len;
        for v in direction.iter_mut() {
            *v *= scale;
        }
    } else {
        direction = vec![0.0; d];
    }
    let start: Vec<f64> = x.iter().zip(&direction).map(|(a, b)| a + b).collect();

    let projected = project_feasible(p, &start, active, cfg).ok()?;
    let feasibility = feasibility_check(p, &projected, tols.feas).ok()?;
    if !feasibility.feasible {
        return None;
    }
    let objective = eval_value(p.objective(), &projected).ok()?;
    if !objective.is_finite() {
        return None;
    }
    Some(FeasibleSample {
        index,
        point: projected,
        objective,
    })
}

fn better(a: &FeasibleSample, b: &FeasibleSample) -> bool {
    // smallest objective wins; exact ties go to the lowest sample index
    a.objective < b.objective || (a.objective == b.objective && a.index < b.index)
}

fn pick_best(a: Option<FeasibleSample>, b: Option<FeasibleSample>) -> Option<FeasibleSample> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if better(&x, &y) { x } else { y }),
        (x, None) => x,
        (None, y) => y,
    }
}

fn assemble(
    p: &ProblemSpec,
    x: &[f64],
    best: Option<FeasibleSample>,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<ProbeResult, OracleError> {
    let f0 = eval_value(p.objective(), x)?;
    let tol_probe = 1e-10 * (1.0 + f0.abs());
    let mut best_feasible_value = f0;
    let mut counterexample = None;
    if let Some(sample) = best {
        if sample.objective < best_feasible_value {
            best_feasible_value = sample.objective;
        }
        if sample.objective < f0 - tol_probe {
            counterexample = Some(Counterexample {
                point: sample.point,
                objective: sample.objective,
                sample_index: sample.index,
            });
        }
    }
    Ok(ProbeResult {
        samples_tested: samples,
        counterexample,
        best_feasible_value,
        radius,
        seed,
        rng: PROBE_RNG.to_string(),
    })
}

/// Probe the feasible neighborhood of `x` for a strictly better point.
///
/// Draws `samples` points uniformly from the ball of `radius` around `x`
/// (deterministically from `seed`), projects each onto the active surface,
/// discards infeasible results, and reports the best feasible objective.
/// Finding nothing is evidence, not proof, of local minimality.
///
/// With the `parallel` feature (default) samples are evaluated on a rayon
/// pool; the result is bit-identical to [`local_min_probe_seq`].
#[allow(clippy::too_many_arguments)]
pub fn local_min_probe(
    p: &ProblemSpec,
    x: &[f64],
    active: &ActiveSet,
    radius: f64,
    samples: usize,
    seed: u64,
    tols: &Tolerances,
    cfg: &NewtonConfig,
) -> Result<ProbeResult, OracleError> {
    #[cfg(feature = "parallel")]
    {
        let best = (0..samples)
            .into_par_iter()
            .map(|i| evaluate_sample(p, x, active, radius, seed, i, tols, cfg))
            .reduce(|| None, pick_best);
        assemble(p, x, best, samples, radius, seed)
    }
    #[cfg(not(feature = "parallel"))]
    {
        local_min_probe_seq(p, x, active, radius, samples, seed, tols, cfg)
    }
}

/// Sequential reference implementation of [`local_min_probe`].
#[allow(clippy::too_many_arguments)]
pub fn local_min_probe_seq(
    p: &ProblemSpec,
    x: &[f64],
    active: &ActiveSet,
    radius: f64,
    samples: usize,
    seed: u64,
    tols: &Tolerances,
    cfg: &NewtonConfig,
) -> Result<ProbeResult, OracleError> {
    let best = (0..samples)
        .map(|i| evaluate_sample(p, x, active, radius, seed, i, tols, cfg))
        .fold(None, pick_best);
    assemble(p, x, best, samples, radius, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expression, parse_problem_file};
    use crate::kkt::active_set;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    fn cfg() -> NewtonConfig {
        NewtonConfig::default()
    }

    #[test]
    fn central_difference_on_quadratic() {
        let e = parse_expression("x0^2", 1).unwrap();
        let g = finite_diff_gradient(&e, &[3.0], 1e-6).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn central_difference_matches_analytic_gradient() {
        let e = parse_expression("sin(x0 * x1)", 2).unwrap();
        let g = finite_diff_gradient(&e, &[0.5, 2.0], 1e-6).unwrap();
        assert!((g[0] - 2.0 * 1.0_f64.cos()).abs() < 1e-6);
        assert!((g[1] - 0.5 * 1.0_f64.cos()).abs() < 1e-6);
    }

    #[test]
    fn central_difference_of_constant_is_zero() {
        let e = parse_expression("7", 3).unwrap();
        let g = finite_diff_gradient(&e, &[1.0, 2.0, 3.0], 1e-6).unwrap();
        assert_eq!(g, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn projection_onto_circle_is_radial() {
        let p = parse_problem_file("vars 2\nminimize x0\neq x0^2 + x1^2 - 2").unwrap();
        let a = active_set(&p, &[1.0, 1.0], 1e-8).unwrap();
        let projected = project_feasible(&p, &[1.1, 1.1], &a, &cfg()).unwrap();
        assert!((projected[0] - 1.0).abs() < 1e-9);
        assert!((projected[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn projection_of_feasible_point_is_identity() {
        let p = parse_problem_file("vars 2\nminimize x0\neq x0^2 + x1^2 - 2").unwrap();
        let a = active_set(&p, &[1.0, 1.0], 1e-8).unwrap();
        let projected = project_feasible(&p, &[1.0, 1.0], &a, &cfg()).unwrap();
        assert_eq!(projected, vec![1.0, 1.0]);
    }

    #[test]
    fn projection_with_empty_active_set_is_identity() {
        let p = parse_problem_file("vars 2\nminimize x0\nineq x0 - 10").unwrap();
        let a = active_set(&p, &[0.0, 0.0], 1e-8).unwrap();
        assert!(a.is_empty());
        let projected = project_feasible(&p, &[0.3, -0.4], &a, &cfg()).unwrap();
        assert_eq!(projected, vec![0.3, -0.4]);
    }

    #[test]
    fn probe_finds_nothing_at_circle_minimizer() {
        let p = parse_problem_file("vars 2\nminimize x0 + x1\neq x0^2 + x1^2 - 2").unwrap();
        let x = [-1.0, -1.0];
        let a = active_set(&p, &x, 1e-8).unwrap();
        let r = local_min_probe(&p, &x, &a, 0.1, 2000, 7, &tols(), &cfg()).unwrap();
        assert!(r.counterexample.is_none(), "unexpected {:?}", r.counterexample);
        assert_eq!(r.samples_tested, 2000);
    }

    #[test]
    fn probe_escapes_the_fake_minimizer() {
        let p = parse_problem_file("vars 2\nminimize x0\nineq x0^2 + x1^2 - 1").unwrap();
        let x = [1.0, 0.0];
        let a = active_set(&p, &x, 1e-8).unwrap();
        let r = local_min_probe(&p, &x, &a, 0.1, 2000, 7, &tols(), &cfg()).unwrap();
        let counter = r.counterexample.expect("interior points abound");
        assert!(counter.objective < 1.0);
        // re-verify feasibility through the expression path alone
        let v = eval_value(p.constraint(1), &counter.point).unwrap();
        assert!(v <= 1e-8);
    }

    #[test]
    fn probe_with_zero_samples_is_empty() {
        let p = parse_problem_file("vars 2\nminimize x0\nineq x0^2 + x1^2 - 1").unwrap();
        let x = [1.0, 0.0];
        let a = active_set(&p, &x, 1e-8).unwrap();
        let r = local_min_probe(&p, &x, &a, 0.1, 0, 7, &tols(), &cfg()).unwrap();
        assert_eq!(r.samples_tested, 0);
        assert!(r.counterexample.is_none());
        assert_eq!(r.best_feasible_value, 1.0);
    }

    #[test]
    fn same_seed_same_result() {
        let p = parse_problem_file("vars 2\nminimize x0\nineq x0^2 + x1^2 - 1").unwrap();
        let x = [1.0, 0.0];
        let a = active_set(&p, &x, 1e-8).unwrap();
        let r1 = local_min_probe(&p, &x, &a, 0.1, 500, 42, &tols(), &cfg()).unwrap();
        let r2 = local_min_probe(&p, &x, &a, 0.1, 500, 42, &tols(), &cfg()).unwrap();
        assert_eq!(r1, r2);
        let r3 = local_min_probe(&p, &x, &a, 0.1, 500, 43, &tols(), &cfg()).unwrap();
        assert_ne!(r1, r3);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_probe_is_bit_identical_to_sequential() {
        let p = parse_problem_file("vars 2\nminimize x0\nineq x0^2 + x1^2 - 1").unwrap();
        let x = [1.0, 0.0];
        let a = active_set(&p, &x, 1e-8).unwrap();
        let par = local_min_probe(&p, &x, &a, 0.1, 1000, 99, &tols(), &cfg()).unwrap();
        let seq = local_min_probe_seq(&p, &x, &a, 0.1, 1000, 99, &tols(), &cfg()).unwrap();
        assert_eq!(par, seq);
    }
}
