//! First-order optimality checks at a candidate point: feasibility,
//! active set, LICQ, multipliers, and the assembled verdict.
//!
//! Verdict precedence: INFEASIBLE > LICQ_FAIL > stationarity/sign failures
//! (which can co-occur and are both reported) > KKT_SATISFIED.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{eval_gradient, eval_value, EvalError, ProblemSpec};
use crate::linalg::{self, least_squares_min_norm, rank_with_tolerance, Matrix, RankReport};

/// Thresholds for the numerical checks. The stationarity tolerance is
/// relative: it is applied as `stat * (1 + ‖f_0'(x)‖)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub feas: f64,
    pub active: f64,
    pub rank: f64,
    pub stat: f64,
    pub sign: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feas: 1e-8,
            active: 1e-8,
            rank: 1e-10,
            stat: 1e-8,
            sign: 1e-8,
        }
    }
}

impl Tolerances {
    /// Stationarity threshold scaled by the objective gradient size.
    pub fn stationarity_threshold(&self, objective_gradient_norm: f64) -> f64 {
        self.stat * (1.0 + objective_gradient_norm)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KktError {
    #[error("point has {got} coordinates, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("point lies on or outside the open box domain (coordinate {coord})")]
    OutsideDomain { coord: usize },
    #[error("active constraint gradients are not linearly independent (rank {rank} of {rows})")]
    LicqFailure { rank: usize, rows: usize },
    #[error("evaluating constraint {index}: {source}")]
    ConstraintEval { index: usize, source: EvalError },
    #[error("evaluating objective: {source}")]
    ObjectiveEval { source: EvalError },
}

/// Constraint indices (1-based; equalities 1..=n, inequalities n+1..=n+m)
/// that hold with equality at the candidate point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveSet {
    /// Sorted 1-based constraint indices. Equalities are always present.
    pub indices: Vec<usize>,
    pub tol_active: f64,
}

impl ActiveSet {
    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Position of a constraint index within the active family, if active.
    pub fn position(&self, index: usize) -> Option<usize> {
        self.indices.binary_search(&index).ok()
    }
}

/// Multipliers paired with the constraints: `lambda` for equalities
/// (unrestricted sign), `mu` for inequalities (nonnegative at a certified
/// point). Inactive inequalities carry exactly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "KKT_SATISFIED")]
    KktSatisfied,
    #[serde(rename = "STATIONARITY_FAIL")]
    StationarityFail,
    #[serde(rename = "SIGN_FAIL")]
    SignFail,
    #[serde(rename = "LICQ_FAIL")]
    LicqFail,
    #[serde(rename = "INFEASIBLE")]
    Infeasible,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::KktSatisfied => "KKT_SATISFIED",
            Verdict::StationarityFail => "STATIONARITY_FAIL",
            Verdict::SignFail => "SIGN_FAIL",
            Verdict::LicqFail => "LICQ_FAIL",
            Verdict::Infeasible => "INFEASIBLE",
        }
    }
}

/// Everything the verdict rests on, reported together so each piece can be
/// audited independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub verdict: Verdict,
    pub feasible: bool,
    pub max_violation: f64,
    pub active_set: ActiveSet,
    /// Rank report on the active constraint gradients.
    pub licq: RankReport,
    pub multipliers: Option<Multipliers>,
    /// ‖f_0'(x) + Σ λ_i f_i'(x) + Σ μ_j f_{n+j}'(x)‖₂, when multipliers
    /// were solved.
    pub stationarity_residual: Option<f64>,
    /// Active inequality multipliers below −tol_sign, as (j, μ_j) with j
    /// 1-based among inequalities.
    pub sign_violations: Vec<(usize, f64)>,
    /// Products μ_j · f_{n+j}(x), one per inequality.
    pub complementarity: Vec<f64>,
    /// Values f_{n+j}(x), one per inequality, so borderline activity
    /// classifications can be audited.
    pub inequality_values: Vec<f64>,
    pub tolerances: Tolerances,
}

/// Outcome of the pure feasibility test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    /// max over constraints of |f_i| (equalities) or max(f_i, 0)
    /// (inequalities); 0 when there are no constraints.
    pub max_violation: f64,
}

fn check_point(p: &ProblemSpec, x: &[f64]) -> Result<(), KktError> {
    if x.len() != p.dim() {
        return Err(KktError::DimensionMismatch {
            got: x.len(),
            expected: p.dim(),
        });
    }
    if let Some(domain) = p.domain_box() {
        for (k, &v) in x.iter().enumerate() {
            if !(domain.lower[k] < v && v < domain.upper[k]) {
                return Err(KktError::OutsideDomain { coord: k });
            }
        }
    }
    Ok(())
}

fn constraint_value(p: &ProblemSpec, index: usize, x: &[f64]) -> Result<f64, KktError> {
    eval_value(p.constraint(index), x).map_err(|source| KktError::ConstraintEval { index, source })
}

/// Check primal feasibility of `x` at tolerance `tol_feas`.
pub fn feasibility_check(
    p: &ProblemSpec,
    x: &[f64],
    tol_feas: f64,
) -> Result<Feasibility, KktError> {
    check_point(p, x)?;
    let n = p.n_equalities();
    let mut max_violation = 0.0_f64;
    for index in 1..=p.constraint_count() {
        let value = constraint_value(p, index, x)?;
        let violation = if index <= n {
            value.abs()
        } else {
            value.max(0.0)
        };
        max_violation = max_violation.max(violation);
    }
    Ok(Feasibility {
        feasible: max_violation <= tol_feas,
        max_violation,
    })
}

/// Active set at `x`: all equalities plus every inequality with
/// `|f_i(x)| <= tol_active`. Assumes `x` already passed feasibility.
pub fn active_set(p: &ProblemSpec, x: &[f64], tol_active: f64) -> Result<ActiveSet, KktError> {
    check_point(p, x)?;
    let n = p.n_equalities();
    let mut indices: Vec<usize> = (1..=n).collect();
    for index in n + 1..=p.constraint_count() {
        if constraint_value(p, index, x)?.abs() <= tol_active {
            indices.push(index);
        }
    }
    Ok(ActiveSet {
        indices,
        tol_active,
    })
}

/// Rows are the gradients of the active constraints at `x`, in active-set
/// order; the 0×1 placeholder matrix when nothing is active.
pub fn active_gradient_matrix(
    p: &ProblemSpec,
    x: &[f64],
    active: &ActiveSet,
) -> Result<Matrix, KktError> {
    let mut rows = Vec::with_capacity(active.len());
    for &index in &active.indices {
        let (_, gradient) = eval_gradient(p.constraint(index), x)
            .map_err(|source| KktError::ConstraintEval { index, source })?;
        rows.push(gradient);
    }
    Ok(Matrix::from_rows(rows).expect("gradients are finite"))
}

/// LICQ test: rank of the active gradients at relative tolerance
/// `tol_rank`. An empty active set is vacuously independent.
pub fn licq_check(
    p: &ProblemSpec,
    x: &[f64],
    active: &ActiveSet,
    tol_rank: f64,
) -> Result<RankReport, KktError> {
    let g = active_gradient_matrix(p, x, active)?;
    Ok(rank_with_tolerance(&g, tol_rank))
}

/// Solve for the multipliers of the active constraints and report the
/// stationarity residual, guarding the rank at the default tolerance.
///
/// The coefficients are the minimum-norm least-squares solution of
/// `G c ≈ −f_0'(x)` where the columns of G are the active gradients;
/// inactive inequalities get exactly zero. Refuses with
/// [`KktError::LicqFailure`] when the active gradients are dependent,
/// because the solution would not be unique.
pub fn solve_multipliers(
    p: &ProblemSpec,
    x: &[f64],
    active: &ActiveSet,
) -> Result<(Multipliers, f64), KktError> {
    solve_multipliers_with_tol(p, x, active, Tolerances::default().rank)
}

/// [`solve_multipliers`] with an explicit relative rank tolerance for the
/// linear-independence guard.
pub fn solve_multipliers_with_tol(
    p: &ProblemSpec,
    x: &[f64],
    active: &ActiveSet,
    tol_rank: f64,
) -> Result<(Multipliers, f64), KktError> {
    check_point(p, x)?;
    let rows = active_gradient_matrix(p, x, active)?;
    let rank = rank_with_tolerance(&rows, tol_rank);
    if !rank.independent {
        return Err(KktError::LicqFailure {
            rank: rank.numerical_rank,
            rows: rows.rows(),
        });
    }
    let (_, objective_gradient) =
        eval_gradient(p.objective(), x).map_err(|source| KktError::ObjectiveEval { source })?;

    let n = p.n_equalities();
    let m = p.m_inequalities();
    let mut lambda = vec![0.0; n];
    let mut mu = vec![0.0; m];

    let residual_vec: Vec<f64>;
    if active.is_empty() {
        residual_vec = objective_gradient;
    } else {
        // columns of G are the active gradients: G = rowsᵀ
        let g = rows.transpose();
        let target: Vec<f64> = objective_gradient.iter().map(|v| -v).collect();
        let coeffs = least_squares_min_norm(&g, &target);
        for (pos, &index) in active.indices.iter().enumerate() {
            if index <= n {
                lambda[index - 1] = coeffs[pos];
            } else {
                mu[index - n - 1] = coeffs[pos];
            }
        }
        let fit = g.matvec(&coeffs);
        residual_vec = objective_gradient
            .iter()
            .zip(&fit)
            .map(|(a, b)| a + b)
            .collect();
    }
    Ok((Multipliers { lambda, mu }, linalg::norm2(&residual_vec)))
}

/// Assemble the full report at `x`.
pub fn kkt_report(p: &ProblemSpec, x: &[f64], tols: &Tolerances) -> Result<KktReport, KktError> {
    let feasibility = feasibility_check(p, x, tols.feas)?;
    let active = active_set(p, x, tols.active)?;
    let licq = licq_check(p, x, &active, tols.rank)?;

    let n = p.n_equalities();
    let m = p.m_inequalities();
    let mut inequality_values = Vec::with_capacity(m);
    for j in 1..=m {
        inequality_values.push(constraint_value(p, n + j, x)?);
    }

    let mut report = KktReport {
        verdict: Verdict::Infeasible,
        feasible: feasibility.feasible,
        max_violation: feasibility.max_violation,
        active_set: active,
        licq,
        multipliers: None,
        stationarity_residual: None,
        sign_violations: Vec::new(),
        complementarity: vec![0.0; m],
        inequality_values,
        tolerances: *tols,
    };

    if !feasibility.feasible {
        return Ok(report);
    }
    if !report.licq.independent {
        report.verdict = Verdict::LicqFail;
        return Ok(report);
    }

    let (multipliers, residual) = solve_multipliers_with_tol(p, x, &report.active_set, tols.rank)?;
    let (_, objective_gradient) =
        eval_gradient(p.objective(), x).map_err(|source| KktError::ObjectiveEval { source })?;
    let threshold = tols.stationarity_threshold(linalg::norm2(&objective_gradient));

    for j in 1..=m {
        report.complementarity[j - 1] = multipliers.mu[j - 1] * report.inequality_values[j - 1];
        if report.active_set.contains(n + j) && multipliers.mu[j - 1] < -tols.sign {
            report.sign_violations.push((j, multipliers.mu[j - 1]));
        }
    }

    let stationarity_ok = residual <= threshold;
    let signs_ok = report.sign_violations.is_empty();
    report.verdict = match (stationarity_ok, signs_ok) {
        (true, true) => Verdict::KktSatisfied,
        (false, _) => Verdict::StationarityFail,
        (true, false) => Verdict::SignFail,
    };
    report.multipliers = Some(multipliers);
    report.stationarity_residual = Some(residual);
    Ok(report)
}
