//! Expression trees for problem definitions, with exact forward-mode
//! gradients.
//!
//! Expressions are parsed once into an immutable [`Expr`] tree and then
//! evaluated at points, either for plain values ([`eval_value`]) or for a
//! value plus its gradient ([`eval_gradient`]). Gradients come from
//! forward-mode [`DualScalar`] arithmetic, never from symbolic
//! manipulation or finite differences.

mod dual;
mod parse;
mod problem;

pub use dual::DualScalar;
pub use parse::{parse_expression, ParseError, ParseErrorKind};
pub use problem::{parse_problem_file, DomainBox, ProblemError, ProblemSpec};

use thiserror::Error;

/// Built-in unary functions. All are C¹ on their stated domains; `abs` is
/// deliberately absent because it is not differentiable at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }
}

/// An immutable expression tree over variables `x0 … x{d-1}`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Largest variable index referenced, or `None` for a constant tree.
    pub fn max_var_index(&self) -> Option<usize> {
        match self {
            Expr::Literal(_) => None,
            Expr::Var(k) => Some(*k),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var_index(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => match (a.max_var_index(), b.max_var_index()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }
}

/// Evaluation failures. Domain violations are reported as errors rather
/// than silently producing NaN or infinity.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("log of non-positive value {0}")]
    LogNonPositive(f64),
    #[error("square root of negative value {0}")]
    SqrtNegative(f64),
    #[error("square root is not differentiable at 0")]
    SqrtDerivativeAtZero,
    #[error("division by zero")]
    DivisionByZero,
    #[error("power with non-positive base {base} requires a constant integer exponent")]
    PowNonPositiveBase { base: f64 },
    #[error("variable x{index} out of range for dimension {dim}")]
    VarOutOfRange { index: usize, dim: usize },
    #[error("non-finite value produced during evaluation")]
    NonFinite,
}

fn finite(v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite)
    }
}

/// True when `v` is an exact integer small enough for `powi`.
fn as_small_integer(v: f64) -> Option<i32> {
    if v.fract() == 0.0 && v.abs() <= f64::from(i32::MAX) {
        Some(v as i32)
    } else {
        None
    }
}

/// Evaluate `e` at `x`.
pub fn eval_value(e: &Expr, x: &[f64]) -> Result<f64, EvalError> {
    let v = match e {
        Expr::Literal(c) => *c,
        Expr::Var(k) => {
            if *k >= x.len() {
                return Err(EvalError::VarOutOfRange {
                    index: *k,
                    dim: x.len(),
                });
            }
            x[*k]
        }
        Expr::Neg(a) => -eval_value(a, x)?,
        Expr::Add(a, b) => eval_value(a, x)? + eval_value(b, x)?,
        Expr::Sub(a, b) => eval_value(a, x)? - eval_value(b, x)?,
        Expr::Mul(a, b) => eval_value(a, x)? * eval_value(b, x)?,
        Expr::Div(a, b) => {
            let num = eval_value(a, x)?;
            let den = eval_value(b, x)?;
            if den == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            num / den
        }
        Expr::Pow(a, b) => {
            let base = eval_value(a, x)?;
            let exponent = eval_value(b, x)?;
            match as_small_integer(exponent) {
                Some(k) => {
                    if k < 0 && base == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    base.powi(k)
                }
                None => {
                    if base <= 0.0 {
                        return Err(EvalError::PowNonPositiveBase { base });
                    }
                    base.powf(exponent)
                }
            }
        }
        Expr::Call(f, a) => {
            let arg = eval_value(a, x)?;
            match f {
                Func::Sin => arg.sin(),
                Func::Cos => arg.cos(),
                Func::Exp => arg.exp(),
                Func::Log => {
                    if arg <= 0.0 {
                        return Err(EvalError::LogNonPositive(arg));
                    }
                    arg.ln()
                }
                Func::Sqrt => {
                    if arg < 0.0 {
                        return Err(EvalError::SqrtNegative(arg));
                    }
                    arg.sqrt()
                }
            }
        }
    };
    finite(v)
}

fn eval_dual(e: &Expr, x: &[f64]) -> Result<DualScalar, EvalError> {
    let dim = x.len();
    let d = match e {
        Expr::Literal(c) => DualScalar::constant(*c, dim),
        Expr::Var(k) => {
            if *k >= dim {
                return Err(EvalError::VarOutOfRange { index: *k, dim });
            }
            DualScalar::variable(x[*k], *k, dim)
        }
        Expr::Neg(a) => -&eval_dual(a, x)?,
        Expr::Add(a, b) => &eval_dual(a, x)? + &eval_dual(b, x)?,
        Expr::Sub(a, b) => &eval_dual(a, x)? - &eval_dual(b, x)?,
        Expr::Mul(a, b) => &eval_dual(a, x)? * &eval_dual(b, x)?,
        Expr::Div(a, b) => eval_dual(a, x)?.div(&eval_dual(b, x)?)?,
        Expr::Pow(a, b) => {
            let base = eval_dual(a, x)?;
            let exponent = eval_dual(b, x)?;
            match as_small_integer(exponent.value) {
                Some(k) if exponent.is_constant() => base.powi(k)?,
                _ => base.pow(&exponent)?,
            }
        }
        Expr::Call(f, a) => {
            let arg = eval_dual(a, x)?;
            match f {
                Func::Sin => arg.sin(),
                Func::Cos => arg.cos(),
                Func::Exp => arg.exp(),
                Func::Log => arg.ln()?,
                Func::Sqrt => arg.sqrt()?,
            }
        }
    };
    finite(d.value)?;
    Ok(d)
}

/// Evaluate `e` at `x`, returning the value and the exact forward-mode
/// gradient.
pub fn eval_gradient(e: &Expr, x: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
    let d = eval_dual(e, x)?;
    if d.partials.iter().any(|p| !p.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    Ok((d.value, d.partials))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str, d: usize) -> Expr {
        parse_expression(text, d).unwrap()
    }

    #[test]
    fn circle_value_at_symmetric_point() {
        let e = p("x0^2 + x1^2 - 2", 2);
        assert_eq!(eval_value(&e, &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(eval_value(&e, &[-1.0, -1.0]).unwrap(), 0.0);
    }

    #[test]
    fn linear_value() {
        let e = p("x0 + x1", 2);
        assert_eq!(eval_value(&e, &[-1.0, -1.0]).unwrap(), -2.0);
    }

    #[test]
    fn log_domain_error() {
        let e = p("log(x0)", 1);
        assert_eq!(eval_value(&e, &[0.0]), Err(EvalError::LogNonPositive(0.0)));
        assert!(eval_value(&e, &[2.0]).is_ok());
    }

    #[test]
    fn circle_gradient() {
        let e = p("x0^2 + x1^2 - 2", 2);
        let (v, g) = eval_gradient(&e, &[1.0, 1.0]).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g, vec![2.0, 2.0]);
    }

    #[test]
    fn product_of_variables_inside_sin() {
        let e = p("sin(x0 * x1)", 2);
        let (v, g) = eval_gradient(&e, &[0.5, 2.0]).unwrap();
        assert!((v - 1.0_f64.sin()).abs() < 1e-15);
        assert!((g[0] - 2.0 * 1.0_f64.cos()).abs() < 1e-15);
        assert!((g[1] - 0.5 * 1.0_f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let e = p("7", 3);
        let (v, g) = eval_gradient(&e, &[10.0, -4.0, 0.3]).unwrap();
        assert_eq!(v, 7.0);
        assert_eq!(g, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn negative_base_integer_exponent() {
        let e = p("x0^3", 1);
        let (v, g) = eval_gradient(&e, &[-2.0]).unwrap();
        assert_eq!(v, -8.0);
        assert_eq!(g, vec![12.0]);
    }

    #[test]
    fn non_integer_exponent_needs_positive_base() {
        let e = p("x0^0.5", 1);
        assert!(matches!(
            eval_value(&e, &[-1.0]),
            Err(EvalError::PowNonPositiveBase { .. })
        ));
        let (v, _) = eval_gradient(&e, &[4.0]).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn variable_exponent_derivative_needs_positive_base() {
        // the value x0^x1 at (-2, 2) exists, but d/dx1 does not
        let e = p("x0^x1", 2);
        assert_eq!(eval_value(&e, &[-2.0, 2.0]).unwrap(), 4.0);
        assert!(eval_gradient(&e, &[-2.0, 2.0]).is_err());
        // with a positive base both are fine: d/dx1 = v ln(base)
        let (v, g) = eval_gradient(&e, &[2.0, 3.0]).unwrap();
        assert_eq!(v, 8.0);
        assert!((g[0] - 12.0).abs() < 1e-12);
        assert!((g[1] - 8.0 * 2.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn overflow_is_reported_not_propagated() {
        let e = p("exp(exp(x0))", 1);
        assert_eq!(eval_value(&e, &[10.0]), Err(EvalError::NonFinite));
    }

    #[test]
    fn max_var_index_walks_the_tree() {
        assert_eq!(p("x0 + sin(x3)", 4).max_var_index(), Some(3));
        assert_eq!(p("1 + 2", 1).max_var_index(), None);
    }
}
