use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// Numeric field the solvers run over.
///
/// Implemented for `f32`, `f64` and exact `BigRational`. Floating types
/// carry a pivot threshold; the rational type pivots on exact zero.
pub trait Scalar:
    Clone + Debug + Display + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Magnitude below which an elimination pivot counts as zero.
    fn pivot_eps() -> Self;

    /// Lossless for rationals, rounding for floats.
    fn lit(x: f64) -> Self;

    fn as_f64(&self) -> f64;

    fn is_exact() -> bool {
        false
    }

    fn sqrt(&self) -> Self {
        Self::lit(self.as_f64().sqrt())
    }
}

impl Scalar for f64 {
    fn pivot_eps() -> Self {
        1e-11
    }
    fn lit(x: f64) -> Self {
        x
    }
    fn as_f64(&self) -> f64 {
        *self
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
}

impl Scalar for f32 {
    fn pivot_eps() -> Self {
        1e-6
    }
    fn lit(x: f64) -> Self {
        x as f32
    }
    fn as_f64(&self) -> f64 {
        *self as f64
    }
    fn sqrt(&self) -> Self {
        f32::sqrt(*self)
    }
}

impl Scalar for BigRational {
    fn pivot_eps() -> Self {
        BigRational::zero()
    }
    fn lit(x: f64) -> Self {
        BigRational::from_f64(x).expect("finite literal")
    }
    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
    fn is_exact() -> bool {
        true
    }
}

/// Exact rational `n/d`.
pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub(crate) fn max_of<T: Scalar>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

pub(crate) fn sum<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, x| acc + x.clone())
}

/// `|a - b| <= tol`, with `tol` read as an absolute bound.
pub(crate) fn close<T: Scalar>(a: &T, b: &T, tol: f64) -> bool {
    (a.clone() - b.clone()).abs() <= T::lit(tol)
}
