//! Coefficient field used throughout the pipeline.
//!
//! Everything that carries a coefficient is generic over [`Scalar`], which is
//! implemented for `f64` (the default real mode) and `Complex64` (complex mode,
//! used when a quadratic root in the damped expansion leaves the real line).

use num_complex::Complex64;
use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
{
    fn from_f64(x: f64) -> Self;
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    fn modulus(self) -> f64;
    fn re(self) -> f64;
    fn im(self) -> f64;
    /// Principal square root; `None` when the root is not in this field.
    fn sqrt_checked(self) -> Option<Self>;
    fn is_finite(self) -> bool;
    fn scale(self, s: f64) -> Self {
        self * Self::from_f64(s)
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn re(self) -> f64 {
        self
    }
    fn im(self) -> f64 {
        0.0
    }
    fn sqrt_checked(self) -> Option<Self> {
        (self >= 0.0).then(|| self.sqrt())
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

impl Scalar for Complex64 {
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn re(self) -> f64 {
        self.re
    }
    fn im(self) -> f64 {
        self.im
    }
    fn sqrt_checked(self) -> Option<Self> {
        Some(self.sqrt())
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}
