//! Truncated Taylor series in the embedding parameter `p`.
//!
//! Coefficients are stored in Taylor form `a_n = f^(n)(0)/n!`; the derivative
//! values used by the homotopy formulas are available through
//! [`Jet::derivative`].

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal::{Signal, SignalError};
use num_complex::Complex64;

/// Additive structure needed for a jet coefficient.
pub trait JetCoeff: Clone {
    fn zero() -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn times_real(&self, s: f64) -> Self;
}

/// Coefficient multiplication `Self · Rhs`.
pub trait JetProduct<Rhs> {
    type Output: JetCoeff;
    fn product(&self, rhs: &Rhs) -> std::result::Result<Self::Output, SignalError>;
}

impl<S: Scalar> JetCoeff for Signal<S> {
    fn zero() -> Self {
        Signal::zero()
    }
    fn plus(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn times_real(&self, s: f64) -> Self {
        self.scale(S::from_f64(s))
    }
}

impl<S: Scalar> JetProduct<Signal<S>> for Signal<S> {
    type Output = Signal<S>;
    fn product(&self, rhs: &Signal<S>) -> std::result::Result<Signal<S>, SignalError> {
        self.mul(rhs)
    }
}

macro_rules! scalar_coeff {
    ($t:ty) => {
        impl JetCoeff for $t {
            fn zero() -> Self {
                <$t as Scalar>::zero()
            }
            fn plus(&self, other: &Self) -> Self {
                *self + *other
            }
            fn times_real(&self, s: f64) -> Self {
                self.scale(s)
            }
        }
        impl JetProduct<$t> for $t {
            type Output = $t;
            fn product(&self, rhs: &$t) -> std::result::Result<$t, SignalError> {
                Ok(*self * *rhs)
            }
        }
        impl JetProduct<Signal<$t>> for $t {
            type Output = Signal<$t>;
            fn product(&self, rhs: &Signal<$t>) -> std::result::Result<Signal<$t>, SignalError> {
                Ok(rhs.scale(*self))
            }
        }
        impl JetProduct<$t> for Signal<$t> {
            type Output = Signal<$t>;
            fn product(&self, rhs: &$t) -> std::result::Result<Signal<$t>, SignalError> {
                Ok(self.scale(*rhs))
            }
        }
    };
}

scalar_coeff!(f64);
scalar_coeff!(Complex64);

#[derive(Clone, Debug, PartialEq)]
pub struct Jet<C> {
    coeffs: Vec<C>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Order-`n` coefficient of the Cauchy product of two coefficient slices.
/// Missing entries count as zero.
pub fn cauchy_at<A, B>(a: &[A], b: &[B], n: usize) -> std::result::Result<A::Output, SignalError>
where
    A: JetProduct<B>,
{
    let mut acc = <A::Output as JetCoeff>::zero();
    for i in 0..=n.min(a.len().saturating_sub(1)) {
        if let Some(bj) = b.get(n - i) {
            acc = acc.plus(&a[i].product(bj)?);
        }
    }
    Ok(acc)
}

impl<C> Jet<C> {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }
}

impl<C: JetCoeff> Jet<C> {
    /// Jet from Taylor coefficients `a_0..a_M`.
    pub fn new(coeffs: Vec<C>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least one coefficient");
        Jet { coeffs }
    }

    /// Jet from derivative values `f(0), f'(0), …, f^(M)(0)`.
    pub fn from_derivatives(values: &[C]) -> Self {
        Jet::new(
            values
                .iter()
                .enumerate()
                .map(|(n, v)| v.times_real(1.0 / factorial(n)))
                .collect(),
        )
    }

    pub fn coeff(&self, n: usize) -> C {
        self.coeffs.get(n).cloned().unwrap_or_else(C::zero)
    }

    /// The derivative value `n!·a_n`.
    pub fn derivative(&self, n: usize) -> C {
        self.coeff(n).times_real(factorial(n))
    }

    pub fn truncate(&self, order: usize) -> Self {
        Jet::new(self.coeffs[..=order.min(self.order())].to_vec())
    }

    pub fn add(&self, other: &Self) -> Self {
        let m = self.order().min(other.order());
        Jet::new((0..=m).map(|n| self.coeffs[n].plus(&other.coeffs[n])).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        Jet::new(self.coeffs.iter().map(|c| c.times_real(s)).collect())
    }

    /// Truncated Cauchy product.
    pub fn mul<B>(&self, other: &Jet<B>) -> Result<Jet<C::Output>>
    where
        C: JetProduct<B>,
    {
        let m = self.order().min(other.order());
        let coeffs = (0..=m)
            .map(|n| cauchy_at(&self.coeffs, &other.coeffs, n))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Jet::new(coeffs))
    }

    pub fn map<D: JetCoeff>(&self, f: impl Fn(&C) -> D) -> Jet<D> {
        Jet::new(self.coeffs.iter().map(f).collect())
    }
}

impl<S: Scalar + JetCoeff + JetProduct<S, Output = S>> Jet<S> {
    /// Value of the truncated series at `p`.
    pub fn eval(&self, p: S) -> S {
        self.coeffs.iter().rev().fold(<S as Scalar>::zero(), |acc, &c| acc * p + c)
    }

    /// Split the order-`n` coefficient of `self²` into a part known from
    /// `a_0..a_{n−1}` and the multiplier `2·a_0` of the not-yet-fixed `a_n`.
    ///
    /// `self` must hold exactly the known coefficients `a_0..a_{n−1}`; the
    /// returned jet is the square of that truncation, extended to order `n`.
    pub fn square_linear_slot(&self, n: usize) -> Result<(Jet<S>, S)> {
        if self.coeffs.len() > n {
            return Err(Error::SlotAlreadyFixed { order: n });
        }
        let mut padded = self.coeffs.clone();
        padded.resize(n + 1, <S as Scalar>::zero());
        let padded = Jet::new(padded);
        let known = padded.mul(&padded)?;
        Ok((known, self.coeffs[0].scale(2.0)))
    }
}

impl Jet<f64> {
    pub fn one_plus_p(order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = 1.0;
        if order >= 1 {
            c[1] = 1.0;
        }
        Jet::new(c)
    }
}
