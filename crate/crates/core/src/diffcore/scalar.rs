use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::Result;

/// Arithmetic shared by plain floats and truncated Taylor series.
///
/// Metric functions and field expressions are written once against this
/// trait, evaluated on `f64` by the finite-difference oracle and on [`Jet`]
/// everywhere derivatives are needed.
///
/// [`Jet`]: super::Jet
pub trait Scalar:
    Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    /// A constant living in the same space as `self`.
    fn lift(&self, c: f64) -> Self;
    fn value(&self) -> f64;
    fn all_finite(&self) -> bool;
    fn recip(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn powi(&self, k: i32) -> Self;
    fn powf(&self, p: f64) -> Self;
}

impl Scalar for f64 {
    fn lift(&self, c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
    fn recip(&self) -> Self {
        1.0 / self
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn powi(&self, k: i32) -> Self {
        f64::powi(*self, k)
    }
    fn powf(&self, p: f64) -> Self {
        f64::powf(*self, p)
    }
}

/// A scalar function of a flat list of variables, evaluable on any [`Scalar`].
pub trait ScalarFn {
    fn nvars(&self) -> usize;
    fn eval<S: Scalar>(&self, vars: &[S]) -> Result<S>;
}
