//! Certify or refute Karush–Kuhn–Tucker conditions at a candidate point of
//! a smooth finite-dimensional constrained minimization problem.
//!
//! The library is organized around the pipeline a certification run
//! follows:
//!
//! * [`expr`] — parse objective and constraint expressions, evaluate
//!   values and exact gradients with forward-mode dual numbers.
//! * [`linalg`] — dense small-scale linear algebra: rank with tolerance,
//!   minimum-norm least squares, and dual (quasi-primal) bases paired with
//!   gradient functionals.
//! * [`kkt`] — feasibility, active set, LICQ, multipliers, and the
//!   verdict.
//! * [`witness`] — Newton-realized constructions that back the verdict
//!   with checkable evidence: feasible descent points and constraint
//!   curves whose slopes re-derive each inequality multiplier.
//! * [`oracle`] — independent brute-force checks: finite-difference
//!   gradients and a seeded feasible-neighborhood probe (data-parallel
//!   under the default `parallel` feature, bit-identical to the
//!   sequential path).
//!
//! ```
//! use kktcheck::{kkt_report, parse_problem_file, Tolerances, Verdict};
//!
//! let problem = parse_problem_file(
//!     "vars 2\nminimize x0 + x1\neq x0^2 + x1^2 - 2",
//! )?;
//! let report = kkt_report(&problem, &[-1.0, -1.0], &Tolerances::default())?;
//! assert_eq!(report.verdict, Verdict::KktSatisfied);
//! assert!((report.multipliers.unwrap().lambda[0] - 0.5).abs() < 1e-8);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod expr;
pub mod kkt;
pub mod linalg;
pub mod oracle;
pub mod witness;

pub use expr::{parse_expression, parse_problem_file, Expr, ProblemSpec};
pub use kkt::{kkt_report, KktReport, Tolerances, Verdict};
pub use linalg::{dual_basis, DualBasis, Matrix, RankReport};
pub use oracle::{local_min_probe, ProbeResult};
pub use witness::{
    constraint_curve, descent_witness, directional_slope, sign_witness, Curve, DescentWitness,
    NewtonConfig, SignWitness,
};
