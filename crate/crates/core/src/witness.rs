//! Constructive evidence behind a verdict.
//!
//! Two parametrized surface maps drive everything here. Both move the
//! candidate point along dual-basis directions, so their Jacobian at the
//! origin is the identity and damped Newton from the origin inverts them
//! locally:
//!
//! * the *descent map* tracks `(f_0, active constraints)` along the dual
//!   basis of the extended gradient family; inverting it toward a lowered
//!   objective value with all constraints held at zero produces a feasible
//!   point strictly below the candidate — a [`DescentWitness`];
//! * the *tangent map* tracks the active constraints along the dual basis
//!   of their own gradients; inverting it toward `−ε e_{j0}` walks a
//!   [`Curve`] that relaxes one inequality while pinning the rest, whose
//!   objective slope at 0 re-derives the multiplier μ_{j0} independently
//!   of the least-squares solve.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{eval_gradient, eval_value, EvalError, Expr, ProblemSpec};
use crate::kkt::{feasibility_check, solve_multipliers, ActiveSet, KktError, Tolerances};
use crate::linalg::{
    dot, dual_basis, least_squares_min_norm, norm2, norm_inf, rank_with_tolerance, LinalgError,
    Matrix, DEFAULT_RANK_TOL,
};

/// Max entrywise deviation tolerated between the assembled Jacobian at the
/// origin and the identity; a direct check on the dual-basis pairing.
pub const JACOBIAN_IDENTITY_TOL: f64 = 1e-8;

/// How often ν or ε is halved before a construction gives up.
pub const MAX_AUTO_HALVINGS: u32 = 40;

/// Starting relaxation for the sign-witness search.
const INITIAL_SIGN_EPSILON: f64 = 0.1;

/// Smallest relaxation the sign-witness search will try.
const MIN_SIGN_EPSILON: f64 = 1e-12;

/// Damped-Newton parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub max_iters: usize,
    /// Convergence threshold on ‖F(t) − target‖∞.
    pub tol_residual: f64,
    /// Trust ball: iterates must keep ‖t‖₂ within this radius.
    pub max_step_radius: f64,
    /// Backtracking factor applied while a step fails to reduce the
    /// residual or leaves the trust ball.
    pub damping: f64,
    pub max_halvings: u32,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            max_iters: 50,
            tol_residual: 1e-12,
            max_step_radius: 1.0,
            damping: 0.5,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WitnessError {
    #[error("extended gradient family is linearly dependent (rank {rank} of {rows}); no descent witness by this construction")]
    DependentFamily { rank: usize, rows: usize },
    #[error("active constraint gradients are not linearly independent")]
    LicqFailure,
    #[error("Newton did not converge within the reachable neighborhood (residual {residual:.3e} after {iterations} iterations)")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("Jacobian numerically singular at Newton iteration {iteration}")]
    JacobianSingular { iteration: usize },
    #[error("Jacobian at the origin deviates from the identity by {deviation:.3e}")]
    JacobianNotIdentity { deviation: f64 },
    #[error("constraint {index} is not active at the candidate point")]
    ConstraintNotActive { index: usize },
    #[error("inequality index {j0} out of range 1..={m}")]
    NoSuchInequality { j0: usize, m: usize },
    #[error("multiplier μ_{j0} = {mu} is not negative beyond tolerance; sign witness does not apply")]
    MultiplierNotNegative { j0: usize, mu: f64 },
    #[error("no feasible descent point found before ε shrank below {limit:.0e}")]
    NoDescentFound { limit: f64 },
    #[error("curve does not contain the ε = 0 sample")]
    CurveNeedsZeroSample,
    #[error("curve does not contain a positive ε sample")]
    CurveNeedsPositiveSample,
    #[error("ν must be positive, got {0}")]
    NonPositiveNu(f64),
    #[error(transparent)]
    Kkt(#[from] KktError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A map t ↦ (components evaluated at base + Σ t_i · directions_i).
///
/// Built so that the Jacobian at t = 0 is the identity, which
/// [`SurfaceMap::identity_deviation`] verifies directly.
pub struct SurfaceMap<'a> {
    base: Vec<f64>,
    directions: Vec<Vec<f64>>,
    components: Vec<&'a Expr>,
}

impl<'a> SurfaceMap<'a> {
    pub fn new(base: Vec<f64>, directions: Vec<Vec<f64>>, components: Vec<&'a Expr>) -> Self {
        assert_eq!(
            directions.len(),
            components.len(),
            "surface map must be square"
        );
        SurfaceMap {
            base,
            directions,
            components,
        }
    }

    pub fn order(&self) -> usize {
        self.components.len()
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    /// The ambient point base + Σ t_i · directions_i.
    pub fn point(&self, t: &[f64]) -> Vec<f64> {
        let mut x = self.base.clone();
        for (coeff, dir) in t.iter().zip(&self.directions) {
            for (xi, di) in x.iter_mut().zip(dir) {
                *xi += coeff * di;
            }
        }
        x
    }

    pub fn values(&self, t: &[f64]) -> Result<Vec<f64>, EvalError> {
        let x = self.point(t);
        self.components.iter().map(|e| eval_value(e, &x)).collect()
    }

    /// Jacobian by the chain rule: row i is ∇f_i(point(t)) paired against
    /// each direction.
    pub fn jacobian(&self, t: &[f64]) -> Result<Matrix, EvalError> {
        let x = self.point(t);
        let k = self.order();
        let mut j = Matrix::zeros(k, k.max(1));
        for (i, e) in self.components.iter().enumerate() {
            let (_, gradient) = eval_gradient(e, &x)?;
            for (c, dir) in self.directions.iter().enumerate() {
                j[(i, c)] = dot(&gradient, dir);
            }
        }
        Ok(j)
    }

    /// Max entrywise |J(0) − I|.
    pub fn identity_deviation(&self) -> Result<f64, EvalError> {
        let j = self.jacobian(&vec![0.0; self.order()])?;
        let mut worst = 0.0_f64;
        for i in 0..self.order() {
            for c in 0..self.order() {
                let target = if i == c { 1.0 } else { 0.0 };
                worst = worst.max((j[(i, c)] - target).abs());
            }
        }
        Ok(worst)
    }

    fn check_identity(&self) -> Result<(), WitnessError> {
        let deviation = self.identity_deviation()?;
        if deviation > JACOBIAN_IDENTITY_TOL {
            return Err(WitnessError::JacobianNotIdentity { deviation });
        }
        Ok(())
    }
}

/// Result of a Newton inversion: the coefficient vector reaching the
/// target, with the iteration count and final ∞-norm residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonTrace {
    pub t: Vec<f64>,
    pub iterations: usize,
    pub residual_inf: f64,
}

fn residual(values: &[f64], target: &[f64]) -> Vec<f64> {
    values.iter().zip(target).map(|(v, y)| v - y).collect()
}

/// Damped Newton from t = 0 for `map(t) = target`.
///
/// Steps that leave the trust ball or fail to reduce the 2-norm residual
/// are backtracked; running out of backtracking or iterations means the
/// target sits outside the numerically reachable neighborhood of the map.
pub fn newton_inverse(
    map: &SurfaceMap,
    target: &[f64],
    cfg: &NewtonConfig,
) -> Result<NewtonTrace, WitnessError> {
    let k = map.order();
    assert_eq!(target.len(), k, "target length must match map order");
    let mut t = vec![0.0; k];
    let mut res = residual(&map.values(&t)?, target);

    if norm_inf(&res) <= cfg.tol_residual {
        return Ok(NewtonTrace {
            t,
            iterations: 0,
            residual_inf: norm_inf(&res),
        });
    }

    for iteration in 1..=cfg.max_iters {
        let jac = map.jacobian(&t)?;
        if !rank_with_tolerance(&jac, DEFAULT_RANK_TOL).independent {
            return Err(WitnessError::JacobianSingular { iteration });
        }
        let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
        let step = least_squares_min_norm(&jac, &rhs);

        let current_norm = norm2(&res);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let candidate: Vec<f64> = t
                .iter()
                .zip(&step)
                .map(|(ti, si)| ti + alpha * si)
                .collect();
            if norm2(&candidate) <= cfg.max_step_radius {
                if let Ok(cand_values) = map.values(&candidate) {
                    let cand_res = residual(&cand_values, target);
                    if norm2(&cand_res) < current_norm {
                        accepted = Some((candidate, cand_res));
                        break;
                    }
                }
            }
            alpha *= cfg.damping;
        }
        let (next_t, next_res) = match accepted {
            Some(pair) => pair,
            None => {
                return Err(WitnessError::NoConvergence {
                    residual: norm_inf(&res),
                    iterations: iteration - 1,
                })
            }
        };
        t = next_t;
        res = next_res;

        if norm_inf(&res) <= cfg.tol_residual {
            return Ok(NewtonTrace {
                t,
                iterations: iteration,
                residual_inf: norm_inf(&res),
            });
        }
    }
    Err(WitnessError::NoConvergence {
        residual: norm_inf(&res),
        iterations: cfg.max_iters,
    })
}

/// Map whose components are `(f_0, then the active constraints)` moved
/// along the dual basis of the extended gradient family
/// `{f_0'(x)} ∪ {f_i'(x) : i active}`.
///
/// Errors with [`WitnessError::DependentFamily`] when that family is
/// dependent — exactly the situation where multipliers exist and no
/// descent witness can come out of this construction.
pub fn descent_map<'a>(
    p: &'a ProblemSpec,
    x: &[f64],
    active: &ActiveSet,
) -> Result<SurfaceMap<'a>, WitnessError> {
    let (_, objective_gradient) = eval_gradient(p.objective(), x)?;
    let mut rows = vec![objective_gradient];
    for &index in &active.indices {
        let (_, gradient) = eval_gradient(p.constraint(index), x)?;
        rows.push(gradient);
    }
    let extended = Matrix::from_rows(rows)?;
    let rank = rank_with_tolerance(&extended, DEFAULT_RANK_TOL);
    if !rank.independent {
        return Err(WitnessError::DependentFamily {
            rank: rank.numerical_rank,
            rows: extended.rows(),
        });
    }
    let basis = dual_basis(&extended)?;
    let mut components = vec![p.objective()];
    components.extend(active.indices.iter().map(|&i| p.constraint(i)));
    Ok(SurfaceMap::new(x.to_vec(), basis.vectors, components))
}

/// Map whose components are the active constraints moved along the dual
/// basis of their own gradients — the tangent-space parametrization of the
/// active surface.
pub fn tangent_map<'a>(
    p: &'a ProblemSpec,
    x: &[f64],
    active: &ActiveSet,
) -> Result<SurfaceMap<'a>, WitnessError> {
    let mut rows = Vec::with_capacity(active.len());
    for &index in &active.indices {
        let (_, gradient) = eval_gradient(p.constraint(index), x)?;
        rows.push(gradient);
    }
    let matrix = Matrix::from_rows(rows)?;
    let basis = dual_basis(&matrix).map_err(|e| match e {
        LinalgError::RankDeficient { .. } => WitnessError::LicqFailure,
        other => WitnessError::Linalg(other),
    })?;
    let components: Vec<&Expr> = active.indices.iter().map(|&i| p.constraint(i)).collect();
    Ok(SurfaceMap::new(x.to_vec(), basis.vectors, components))
}

/// A feasible point strictly below the candidate, with the Newton trace
/// that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentWitness {
    /// Objective decrease actually requested (after any halving).
    pub nu: f64,
    pub x_nu: Vec<f64>,
    /// Coefficients along the extended dual basis, length 1 + |active|.
    pub t_nu: Vec<f64>,
    pub objective_drop: f64,
    /// Max |f_i(x_ν)| over the active family.
    pub max_constraint_violation: f64,
    pub newton_iters: usize,
}

/// Construct a feasible point with objective value `f_0(x) − ν`, holding
/// every active constraint at zero.
///
/// On Newton failure (or a violated side condition) ν is halved, at most
/// [`MAX_AUTO_HALVINGS`] times; the witness records the ν that worked.
pub fn descent_witness(
    p: &ProblemSpec,
    x: &[f64],
    active: &ActiveSet,
    nu: f64,
    tols: &Tolerances,
    cfg: &NewtonConfig,
) -> Result<DescentWitness, WitnessError> {
    if nu <= 0.0 {
        return Err(WitnessError::NonPositiveNu(nu));
    }
    let map = descent_map(p, x, active)?;
    map.check_identity()?;
    let f0_at_x = eval_value(p.objective(), x)?;
    let n = p.n_equalities();

    let mut current_nu = nu;
    let mut last_failure = WitnessError::NoConvergence {
        residual: f64::NAN,
        iterations: 0,
    };
    for _ in 0..=MAX_AUTO_HALVINGS {
        let mut target = vec![0.0; map.order()];
        target[0] = f0_at_x - current_nu;
        match newton_inverse(&map, &target, cfg) {
            Err(err @ (WitnessError::NoConvergence { .. } | WitnessError::JacobianSingular { .. })) => {
                last_failure = err;
                current_nu *= 0.5;
                continue;
            }
            Err(other) => return Err(other),
            Ok(trace) => {
                let x_nu = map.point(&trace.t);
                if let Some(witness) =
                    accept_descent_point(p, &x_nu, active, n, f0_at_x, current_nu, &trace, tols)?
                {
                    return Ok(witness);
                }
                last_failure = WitnessError::NoDescentFound {
                    limit: MIN_SIGN_EPSILON,
                };
                current_nu *= 0.5;
            }
        }
    }
    Err(last_failure)
}

/// Side conditions at a candidate descent point: active family held at
/// zero, originally-inactive inequalities still strictly satisfied, point
/// strictly inside the domain box. Returns None to request a smaller ν.
#[allow(clippy::too_many_arguments)]
fn accept_descent_point(
    p: &ProblemSpec,
    x_nu: &[f64],
    active: &ActiveSet,
    n: usize,
    f0_at_x: f64,
    current_nu: f64,
    trace: &NewtonTrace,
    tols: &Tolerances,
) -> Result<Option<DescentWitness>, WitnessError> {
    if let Some(domain) = p.domain_box() {
        if !domain.contains_strictly(x_nu) {
            return Ok(None);
        }
    }
    let mut max_violation = 0.0_f64;
    for &index in &active.indices {
        match eval_value(p.constraint(index), x_nu) {
            Ok(v) => max_violation = max_violation.max(v.abs()),
            Err(_) => return Ok(None),
        }
    }
    if max_violation > tols.feas {
        return Ok(None);
    }
    for index in n + 1..=p.constraint_count() {
        if active.contains(index) {
            continue;
        }
        match eval_value(p.constraint(index), x_nu) {
            Ok(v) if v < 0.0 => {}
            _ => return Ok(None),
        }
    }
    let f0_at_witness = match eval_value(p.objective(), x_nu) {
        Ok(v) => v,
        Err(_) => return Ok(None),
    };
    Ok(Some(DescentWitness {
        nu: current_nu,
        x_nu: x_nu.to_vec(),
        t_nu: trace.t.clone(),
        objective_drop: f0_at_x - f0_at_witness,
        max_constraint_violation: max_violation,
        newton_iters: trace.iterations,
    }))
}

/// A sampled path on the active surface with one inequality relaxed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    /// 1-based inequality number being relaxed (constraint index n + j0).
    pub j0: usize,
    pub epsilons: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    /// Dual vector paired with the relaxed constraint; the curve's tangent
    /// at 0 is −w_j0.
    pub w_j0: Vec<f64>,
    /// Forward difference of the objective at the smallest positive ε, if
    /// one was sampled.
    pub slope_estimate: Option<f64>,
}

/// Walk the curve that drives inequality `j0` to `−ε` while keeping every
/// other active constraint at zero.
///
/// `ε = 0` samples return the candidate point itself with zero Newton
/// iterations; other samples Newton-solve the tangent map and fail with
/// [`WitnessError::NoConvergence`] if the requested ε is out of reach.
pub fn constraint_curve(
    p: &ProblemSpec,
    x: &[f64],
    active: &ActiveSet,
    j0: usize,
    epsilons: &[f64],
    cfg: &NewtonConfig,
) -> Result<Curve, WitnessError> {
    let m = p.m_inequalities();
    if j0 == 0 || j0 > m {
        return Err(WitnessError::NoSuchInequality { j0, m });
    }
    let index = p.n_equalities() + j0;
    let pos = active
        .position(index)
        .ok_or(WitnessError::ConstraintNotActive { index })?;

    let map = tangent_map(p, x, active)?;
    map.check_identity()?;

    let mut points = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        if eps == 0.0 {
            points.push(x.to_vec());
            continue;
        }
        let mut target = vec![0.0; map.order()];
        target[pos] = -eps;
        let trace = newton_inverse(&map, &target, cfg)?;
        points.push(map.point(&trace.t));
    }

    let f0_at_x = eval_value(p.objective(), x)?;
    let mut slope_estimate = None;
    let mut smallest_positive = f64::INFINITY;
    for (&eps, point) in epsilons.iter().zip(&points) {
        if eps > 0.0 && eps < smallest_positive {
            smallest_positive = eps;
            slope_estimate = Some((eval_value(p.objective(), point)? - f0_at_x) / eps);
        }
    }

    Ok(Curve {
        j0,
        epsilons: epsilons.to_vec(),
        points,
        w_j0: map.directions()[pos].clone(),
        slope_estimate,
    })
}

/// The objective slope along a curve at ε = 0, computed two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    /// One-sided forward difference at the smallest sampled ε > 0; the
    /// feasible side of the relaxation.
    pub finite_difference: f64,
    /// −f_0'(x) · w_{j0}: the multiplier identity, evaluated directly.
    pub analytic: f64,
}

/// Slope of the objective along `curve`, as a forward finite difference
/// together with the analytic value −f_0'(x)·w_{j0}. Both estimate the
/// multiplier μ_{j0}.
pub fn directional_slope(p: &ProblemSpec, curve: &Curve) -> Result<SlopeEstimate, WitnessError> {
    let zero_pos = curve
        .epsilons
        .iter()
        .position(|&e| e == 0.0)
        .ok_or(WitnessError::CurveNeedsZeroSample)?;
    let origin = &curve.points[zero_pos];

    let mut best: Option<(f64, &Vec<f64>)> = None;
    for (&eps, point) in curve.epsilons.iter().zip(&curve.points) {
        if eps > 0.0 && best.is_none_or(|(b, _)| eps < b) {
            best = Some((eps, point));
        }
    }
    let (eps, point) = best.ok_or(WitnessError::CurveNeedsPositiveSample)?;

    let f0_origin = eval_value(p.objective(), origin)?;
    let f0_eps = eval_value(p.objective(), point)?;
    let (_, gradient) = eval_gradient(p.objective(), origin)?;
    Ok(SlopeEstimate {
        finite_difference: (f0_eps - f0_origin) / eps,
        analytic: -dot(&gradient, &curve.w_j0),
    })
}

/// A feasible point with strictly lower objective, found by relaxing an
/// inequality whose multiplier is negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignWitness {
    pub j0: usize,
    /// Relaxation that produced the accepted point.
    pub epsilon: f64,
    pub x: Vec<f64>,
    pub objective_drop: f64,
    pub max_constraint_violation: f64,
    /// The negative multiplier that licensed the construction.
    pub mu_j0: f64,
}

/// Walk the curve relaxing inequality `j0` until a feasible point with
/// `f_0(x') ≤ f_0(x) − 0.25·|μ_{j0}|·ε` appears, halving ε on every
/// failure.
///
/// Refuses when μ_{j0} is not negative beyond `tols.sign` — at such points
/// the same curve certifies rather than refutes the candidate.
pub fn sign_witness(
    p: &ProblemSpec,
    x: &[f64],
    active: &ActiveSet,
    j0: usize,
    tols: &Tolerances,
    cfg: &NewtonConfig,
) -> Result<SignWitness, WitnessError> {
    let m = p.m_inequalities();
    if j0 == 0 || j0 > m {
        return Err(WitnessError::NoSuchInequality { j0, m });
    }
    let index = p.n_equalities() + j0;
    if active.position(index).is_none() {
        return Err(WitnessError::ConstraintNotActive { index });
    }
    let (multipliers, _) = solve_multipliers(p, x, active).map_err(|e| match e {
        KktError::LicqFailure { .. } => WitnessError::LicqFailure,
        other => WitnessError::Kkt(other),
    })?;
    let mu_j0 = multipliers.mu[j0 - 1];
    if mu_j0 >= -tols.sign {
        return Err(WitnessError::MultiplierNotNegative { j0, mu: mu_j0 });
    }
    let f0_at_x = eval_value(p.objective(), x)?;

    let mut eps = INITIAL_SIGN_EPSILON;
    for _ in 0..=MAX_AUTO_HALVINGS {
        if eps < MIN_SIGN_EPSILON {
            break;
        }
        match constraint_curve(p, x, active, j0, &[eps], cfg) {
            Err(WitnessError::NoConvergence { .. } | WitnessError::JacobianSingular { .. }) => {
                eps *= 0.5;
                continue;
            }
            Err(other) => return Err(other),
            Ok(curve) => {
                let candidate = &curve.points[0];
                let feasibility = match feasibility_check(p, candidate, tols.feas) {
                    Ok(f) => f,
                    Err(_) => {
                        eps *= 0.5;
                        continue;
                    }
                };
                if !feasibility.feasible {
                    eps *= 0.5;
                    continue;
                }
                let f0_candidate = match eval_value(p.objective(), candidate) {
                    Ok(v) => v,
                    Err(_) => {
                        eps *= 0.5;
                        continue;
                    }
                };
                if f0_candidate <= f0_at_x - 0.25 * mu_j0.abs() * eps {
                    return Ok(SignWitness {
                        j0,
                        epsilon: eps,
                        x: candidate.clone(),
                        objective_drop: f0_at_x - f0_candidate,
                        max_constraint_violation: feasibility.max_violation,
                        mu_j0,
                    });
                }
                eps *= 0.5;
            }
        }
    }
    Err(WitnessError::NoDescentFound {
        limit: MIN_SIGN_EPSILON,
    })
}
