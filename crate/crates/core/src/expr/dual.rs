//! Forward-mode dual scalars carrying a value and a full partial vector.

use std::ops::{Add, Mul, Neg, Sub};

use super::EvalError;

/// A scalar paired with its vector of partial derivatives.
///
/// Arithmetic propagates the sum, product, and chain rules exactly (up to
/// floating point), so evaluating an expression tree over `DualScalar`
/// inputs yields the exact gradient alongside the value.
#[derive(Debug, Clone, PartialEq)]
pub struct DualScalar {
    pub value: f64,
    pub partials: Vec<f64>,
}

impl DualScalar {
    /// A constant: value with all partials zero.
    pub fn constant(value: f64, dim: usize) -> Self {
        DualScalar {
            value,
            partials: vec![0.0; dim],
        }
    }

    /// The seed for coordinate `index`: partial vector `e_index`.
    pub fn variable(value: f64, index: usize, dim: usize) -> Self {
        let mut partials = vec![0.0; dim];
        partials[index] = 1.0;
        DualScalar { value, partials }
    }

    pub fn dim(&self) -> usize {
        self.partials.len()
    }

    fn map_chain(&self, value: f64, outer_derivative: f64) -> Self {
        DualScalar {
            value,
            partials: self.partials.iter().map(|p| outer_derivative * p).collect(),
        }
    }

    pub fn sin(&self) -> Self {
        self.map_chain(self.value.sin(), self.value.cos())
    }

    pub fn cos(&self) -> Self {
        self.map_chain(self.value.cos(), -self.value.sin())
    }

    pub fn exp(&self) -> Self {
        let v = self.value.exp();
        self.map_chain(v, v)
    }

    pub fn ln(&self) -> Result<Self, EvalError> {
        if self.value <= 0.0 {
            return Err(EvalError::LogNonPositive(self.value));
        }
        Ok(self.map_chain(self.value.ln(), 1.0 / self.value))
    }

    pub fn sqrt(&self) -> Result<Self, EvalError> {
        if self.value < 0.0 {
            return Err(EvalError::SqrtNegative(self.value));
        }
        let root = self.value.sqrt();
        if root == 0.0 {
            // d(sqrt)/du blows up at 0; only a constant-zero subtree survives.
            if self.partials.iter().any(|&p| p != 0.0) {
                return Err(EvalError::SqrtDerivativeAtZero);
            }
            return Ok(DualScalar::constant(0.0, self.dim()));
        }
        Ok(self.map_chain(root, 0.5 / root))
    }

    pub fn div(&self, rhs: &Self) -> Result<Self, EvalError> {
        if rhs.value == 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        let value = self.value / rhs.value;
        let denom_sq = rhs.value * rhs.value;
        let partials = self
            .partials
            .iter()
            .zip(&rhs.partials)
            .map(|(a, b)| (a * rhs.value - self.value * b) / denom_sq)
            .collect();
        Ok(DualScalar { value, partials })
    }

    /// Integer power by repeated squaring; valid for any base.
    pub fn powi(&self, k: i32) -> Result<Self, EvalError> {
        if k < 0 && self.value == 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        let value = self.value.powi(k);
        let coeff = if k == 0 {
            0.0
        } else {
            f64::from(k) * self.value.powi(k - 1)
        };
        Ok(self.map_chain(value, coeff))
    }

    /// General power `self^rhs`; requires a strictly positive base.
    pub fn pow(&self, rhs: &Self) -> Result<Self, EvalError> {
        if self.value <= 0.0 {
            return Err(EvalError::PowNonPositiveBase { base: self.value });
        }
        let value = self.value.powf(rhs.value);
        let ln_base = self.value.ln();
        let partials = self
            .partials
            .iter()
            .zip(&rhs.partials)
            .map(|(db, de)| value * (de * ln_base + rhs.value * db / self.value))
            .collect();
        Ok(DualScalar { value, partials })
    }

    /// True when every partial is exactly zero (a constant subtree).
    pub fn is_constant(&self) -> bool {
        self.partials.iter().all(|&p| p == 0.0)
    }
}

impl Add for &DualScalar {
    type Output = DualScalar;

    fn add(self, rhs: &DualScalar) -> DualScalar {
        DualScalar {
            value: self.value + rhs.value,
            partials: self
                .partials
                .iter()
                .zip(&rhs.partials)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &DualScalar {
    type Output = DualScalar;

    fn sub(self, rhs: &DualScalar) -> DualScalar {
        DualScalar {
            value: self.value - rhs.value,
            partials: self
                .partials
                .iter()
                .zip(&rhs.partials)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &DualScalar {
    type Output = DualScalar;

    // product rule, hence the + inside
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: &DualScalar) -> DualScalar {
        DualScalar {
            value: self.value * rhs.value,
            partials: self
                .partials
                .iter()
                .zip(&rhs.partials)
                .map(|(a, b)| a * rhs.value + self.value * b)
                .collect(),
        }
    }
}

impl Neg for &DualScalar {
    type Output = DualScalar;

    fn neg(self) -> DualScalar {
        DualScalar {
            value: -self.value,
            partials: self.partials.iter().map(|p| -p).collect(),
        }
    }
}
