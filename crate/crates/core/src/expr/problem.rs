//! Problem definitions: objective, constraints, and the line-oriented file
//! format.
//!
//! ```text
//! vars 2                      # required first line: ambient dimension
//! minimize x0 + x1            # exactly one objective
//! eq x0^2 + x1^2 - 2          # equality constraint, f = 0
//! ineq 1 - x0                 # inequality constraint, f <= 0
//! box 0 -10 10                # optional open-interval bound on coordinate 0
//! point -1 -1                 # optional default candidate point
//! ```
//!
//! Constraints are numbered with equalities first (1..=n in file order)
//! followed by inequalities (n+1..=n+m in file order), regardless of how
//! the lines are interleaved.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{parse_expression, Expr, ParseError};

/// Open box domain: the candidate point must satisfy `lower[k] < x[k] <
/// upper[k]` strictly for every coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DomainBox {
    pub fn unbounded(d: usize) -> Self {
        DomainBox {
            lower: vec![f64::NEG_INFINITY; d],
            upper: vec![f64::INFINITY; d],
        }
    }

    /// Strict interior test; the domain is open.
    pub fn contains_strictly(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&lo, &hi))| lo < v && v < hi)
    }
}

/// A constrained minimization problem over `R^d`: minimize the objective
/// subject to `f_i = 0` for equalities and `f_i <= 0` for inequalities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    d: usize,
    objective: Expr,
    equalities: Vec<Expr>,
    inequalities: Vec<Expr>,
    domain_box: Option<DomainBox>,
    default_point: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("{role} references x{index}, but the problem has dimension {dim}")]
    VarOutOfRange {
        role: String,
        index: usize,
        dim: usize,
    },
    #[error("box bound for coordinate {coord}: lower {lower} must be below upper {upper}")]
    EmptyBox {
        coord: usize,
        lower: f64,
        upper: f64,
    },
    #[error("box coordinate {coord} out of range for dimension {dim}")]
    BoxCoordOutOfRange { coord: usize, dim: usize },
    #[error("point has {got} coordinates, expected {expected}")]
    PointLength { got: usize, expected: usize },
}

impl ProblemSpec {
    pub fn new(
        d: usize,
        objective: Expr,
        equalities: Vec<Expr>,
        inequalities: Vec<Expr>,
    ) -> Result<Self, ProblemError> {
        if d == 0 {
            return Err(ProblemError::ZeroDimension);
        }
        let check = |expr: &Expr, role: String| -> Result<(), ProblemError> {
            if let Some(index) = expr.max_var_index() {
                if index >= d {
                    return Err(ProblemError::VarOutOfRange { role, index, dim: d });
                }
            }
            Ok(())
        };
        check(&objective, "objective".to_string())?;
        for (i, e) in equalities.iter().enumerate() {
            check(e, format!("equality {}", i + 1))?;
        }
        for (j, e) in inequalities.iter().enumerate() {
            check(e, format!("inequality {}", j + 1))?;
        }
        Ok(ProblemSpec {
            d,
            objective,
            equalities,
            inequalities,
            domain_box: None,
            default_point: None,
        })
    }

    pub fn with_domain_box(mut self, domain_box: DomainBox) -> Result<Self, ProblemError> {
        for k in 0..self.d {
            if domain_box.lower[k] >= domain_box.upper[k] {
                return Err(ProblemError::EmptyBox {
                    coord: k,
                    lower: domain_box.lower[k],
                    upper: domain_box.upper[k],
                });
            }
        }
        self.domain_box = Some(domain_box);
        Ok(self)
    }

    pub fn with_default_point(mut self, point: Vec<f64>) -> Result<Self, ProblemError> {
        if point.len() != self.d {
            return Err(ProblemError::PointLength {
                got: point.len(),
                expected: self.d,
            });
        }
        self.default_point = Some(point);
        Ok(self)
    }

    /// Ambient dimension d.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of equality constraints n.
    pub fn n_equalities(&self) -> usize {
        self.equalities.len()
    }

    /// Number of inequality constraints m.
    pub fn m_inequalities(&self) -> usize {
        self.inequalities.len()
    }

    pub fn constraint_count(&self) -> usize {
        self.equalities.len() + self.inequalities.len()
    }

    pub fn objective(&self) -> &Expr {
        &self.objective
    }

    pub fn equalities(&self) -> &[Expr] {
        &self.equalities
    }

    pub fn inequalities(&self) -> &[Expr] {
        &self.inequalities
    }

    /// Constraint by 1-based index: 1..=n are equalities, n+1..=n+m are
    /// inequalities.
    ///
    /// Panics if `index` is 0 or beyond n+m.
    pub fn constraint(&self, index: usize) -> &Expr {
        let n = self.equalities.len();
        assert!(
            index >= 1 && index <= self.constraint_count(),
            "constraint index {index} out of range 1..={}",
            self.constraint_count()
        );
        if index <= n {
            &self.equalities[index - 1]
        } else {
            &self.inequalities[index - n - 1]
        }
    }

    /// True when the 1-based constraint index refers to an inequality.
    pub fn is_inequality(&self, index: usize) -> bool {
        index > self.equalities.len()
    }

    pub fn domain_box(&self) -> Option<&DomainBox> {
        self.domain_box.as_ref()
    }

    pub fn default_point(&self) -> Option<&[f64]> {
        self.default_point.as_deref()
    }
}

/// Problem-file parse failures, located by 1-based line number.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemFileError {
    #[error("missing `vars <d>` declaration before other content")]
    MissingVars,
    #[error("missing `minimize <expr>` line")]
    MissingMinimize,
    #[error("line {line}: duplicate `{what}` line")]
    Duplicate { line: usize, what: &'static str },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: {err}")]
    Expr { line: usize, err: ParseError },
    #[error("{0}")]
    Problem(#[from] ProblemError),
}

fn parse_f64(token: &str, line: usize, what: &str) -> Result<f64, ProblemFileError> {
    token.parse::<f64>().map_err(|_| ProblemFileError::Malformed {
        line,
        msg: format!("cannot parse {what} `{token}` as a real number"),
    })
}

/// Parse the line-oriented problem file format.
pub fn parse_problem_file(text: &str) -> Result<ProblemSpec, ProblemFileError> {
    let mut d: Option<usize> = None;
    let mut objective: Option<Expr> = None;
    let mut equalities: Vec<Expr> = Vec::new();
    let mut inequalities: Vec<Expr> = Vec::new();
    let mut box_bounds: Vec<Option<(f64, f64)>> = Vec::new();
    let mut point: Option<Vec<f64>> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.split_once('#') {
            Some((head, _)) => head,
            None => raw,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        let (keyword, rest) = match content.split_once(char::is_whitespace) {
            Some((k, r)) => (k, r.trim()),
            None => (content, ""),
        };
        if keyword != "vars" && d.is_none() {
            return Err(ProblemFileError::MissingVars);
        }
        match keyword {
            "vars" => {
                if d.is_some() {
                    return Err(ProblemFileError::Duplicate { line, what: "vars" });
                }
                let parsed: usize = rest.parse().map_err(|_| ProblemFileError::Malformed {
                    line,
                    msg: format!("cannot parse dimension `{rest}`"),
                })?;
                if parsed == 0 {
                    return Err(ProblemFileError::Malformed {
                        line,
                        msg: "dimension must be at least 1".to_string(),
                    });
                }
                box_bounds = vec![None; parsed];
                d = Some(parsed);
            }
            "minimize" => {
                if objective.is_some() {
                    return Err(ProblemFileError::Duplicate {
                        line,
                        what: "minimize",
                    });
                }
                let expr = parse_expression(rest, d.unwrap())
                    .map_err(|err| ProblemFileError::Expr { line, err })?;
                objective = Some(expr);
            }
            "eq" => {
                let expr = parse_expression(rest, d.unwrap())
                    .map_err(|err| ProblemFileError::Expr { line, err })?;
                equalities.push(expr);
            }
            "ineq" => {
                let expr = parse_expression(rest, d.unwrap())
                    .map_err(|err| ProblemFileError::Expr { line, err })?;
                inequalities.push(expr);
            }
            "box" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(ProblemFileError::Malformed {
                        line,
                        msg: "expected `box <coord> <lower> <upper>`".to_string(),
                    });
                }
                let coord: usize =
                    parts[0].parse().map_err(|_| ProblemFileError::Malformed {
                        line,
                        msg: format!("cannot parse coordinate `{}`", parts[0]),
                    })?;
                if coord >= d.unwrap() {
                    return Err(ProblemFileError::Malformed {
                        line,
                        msg: format!(
                            "box coordinate {coord} out of range for dimension {}",
                            d.unwrap()
                        ),
                    });
                }
                if box_bounds[coord].is_some() {
                    return Err(ProblemFileError::Duplicate { line, what: "box" });
                }
                let lo = parse_f64(parts[1], line, "lower bound")?;
                let hi = parse_f64(parts[2], line, "upper bound")?;
                box_bounds[coord] = Some((lo, hi));
            }
            "point" => {
                if point.is_some() {
                    return Err(ProblemFileError::Duplicate { line, what: "point" });
                }
                let coords: Result<Vec<f64>, _> = rest
                    .split_whitespace()
                    .map(|t| parse_f64(t, line, "coordinate"))
                    .collect();
                let coords = coords?;
                if coords.len() != d.unwrap() {
                    return Err(ProblemFileError::Malformed {
                        line,
                        msg: format!(
                            "point has {} coordinates, expected {}",
                            coords.len(),
                            d.unwrap()
                        ),
                    });
                }
                point = Some(coords);
            }
            other => {
                return Err(ProblemFileError::Malformed {
                    line,
                    msg: format!("unknown directive `{other}`"),
                });
            }
        }
    }

    let d = d.ok_or(ProblemFileError::MissingVars)?;
    let objective = objective.ok_or(ProblemFileError::MissingMinimize)?;

    let mut problem = ProblemSpec::new(d, objective, equalities, inequalities)?;
    if box_bounds.iter().any(Option::is_some) {
        let mut domain = DomainBox::unbounded(d);
        for (k, bounds) in box_bounds.iter().enumerate() {
            if let Some((lo, hi)) = bounds {
                domain.lower[k] = *lo;
                domain.upper[k] = *hi;
            }
        }
        problem = problem.with_domain_box(domain)?;
    }
    if let Some(p) = point {
        problem = problem.with_default_point(p)?;
    }
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_equality_problem() {
        let p = parse_problem_file("vars 2\nminimize x0 + x1\neq x0^2 + x1^2 - 2").unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.n_equalities(), 1);
        assert_eq!(p.m_inequalities(), 0);
    }

    #[test]
    fn minimal_inequality_problem() {
        let p = parse_problem_file("vars 2\nminimize x0^2 + x1^2\nineq 1 - x0").unwrap();
        assert_eq!(p.n_equalities(), 0);
        assert_eq!(p.m_inequalities(), 1);
    }

    #[test]
    fn missing_vars_is_an_error() {
        assert_eq!(
            parse_problem_file("minimize x0"),
            Err(ProblemFileError::MissingVars)
        );
    }

    #[test]
    fn missing_minimize_is_an_error() {
        assert_eq!(
            parse_problem_file("vars 1\neq x0"),
            Err(ProblemFileError::MissingMinimize)
        );
    }

    #[test]
    fn duplicate_minimize_is_an_error() {
        let err = parse_problem_file("vars 1\nminimize x0\nminimize x0").unwrap_err();
        assert_eq!(
            err,
            ProblemFileError::Duplicate {
                line: 3,
                what: "minimize"
            }
        );
    }

    #[test]
    fn constraint_indices_put_equalities_first() {
        let p = parse_problem_file(
            "vars 2\nminimize x0\nineq 1 - x0\neq x0 + x1\nineq x1 - 3",
        )
        .unwrap();
        assert_eq!(p.n_equalities(), 1);
        assert_eq!(p.m_inequalities(), 2);
        // constraint 1 is the equality even though an ineq came first in the file
        assert_eq!(p.constraint(1), &parse_expression("x0 + x1", 2).unwrap());
        assert_eq!(p.constraint(2), &parse_expression("1 - x0", 2).unwrap());
        assert!(p.is_inequality(2));
        assert!(!p.is_inequality(1));
    }

    #[test]
    fn box_and_point_lines() {
        let p = parse_problem_file(
            "vars 2\nminimize x0\nbox 0 -1 inf\nbox 1 -inf 5\npoint 0.5 0.5",
        )
        .unwrap();
        let b = p.domain_box().unwrap();
        assert_eq!(b.lower, vec![-1.0, f64::NEG_INFINITY]);
        assert_eq!(b.upper, vec![f64::INFINITY, 5.0]);
        assert!(b.contains_strictly(&[0.5, 0.5]));
        assert!(!b.contains_strictly(&[-1.0, 0.0]));
        assert_eq!(p.default_point(), Some(&[0.5, 0.5][..]));
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let p = parse_problem_file(
            "# a problem\n\nvars 2   # two variables\nminimize x0 + x1 # linear\n\neq x0^2 + x1^2 - 2\n",
        )
        .unwrap();
        assert_eq!(p.n_equalities(), 1);
    }

    #[test]
    fn unknown_directive_is_malformed() {
        let err = parse_problem_file("vars 1\nminimize x0\nmaximize x0").unwrap_err();
        assert!(matches!(err, ProblemFileError::Malformed { line: 3, .. }));
    }

    #[test]
    fn expression_errors_carry_line_numbers() {
        let err = parse_problem_file("vars 2\nminimize x0 +").unwrap_err();
        match err {
            ProblemFileError::Expr { line, err } => {
                assert_eq!(line, 2);
                assert_eq!(err.offset, 4);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn wrong_point_length_is_rejected() {
        let err = parse_problem_file("vars 2\nminimize x0\npoint 1").unwrap_err();
        assert!(matches!(err, ProblemFileError::Malformed { line: 3, .. }));
    }
}
