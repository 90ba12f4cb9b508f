use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::tape::DiffScalar;

/// Scalar abstraction shared by plain `f64` evaluation and taped
/// evaluation. Physics code is written once against this trait.
pub trait Real:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// Untracked constant.
    fn cst(v: f64) -> Self;
    fn value(self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn abs(self) -> Self;
    fn atan2(self, x: Self) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn one() -> Self {
        Self::cst(1.0)
    }

    fn square(self) -> Self {
        self * self
    }
}

impl Real for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
}

impl<'t> Real for DiffScalar<'t> {
    fn cst(v: f64) -> Self {
        DiffScalar::constant(v)
    }
    fn value(self) -> f64 {
        DiffScalar::value(&self)
    }
    fn sqrt(self) -> Self {
        DiffScalar::sqrt(self)
    }
    fn sin(self) -> Self {
        DiffScalar::sin(self)
    }
    fn cos(self) -> Self {
        DiffScalar::cos(self)
    }
    fn exp(self) -> Self {
        DiffScalar::exp(self)
    }
    fn ln(self) -> Self {
        DiffScalar::ln(self)
    }
    fn abs(self) -> Self {
        DiffScalar::abs(self)
    }
    fn atan2(self, x: Self) -> Self {
        DiffScalar::atan2(self, x)
    }
}
