//! Scalar abstractions.
//!
//! [`Real`] is the floating-point scalar used by every solver. [`ExtendedReal`]
//! is the narrower interface needed by the cost-matrix algebra, which only adds,
//! subtracts, halves and compares; it is also implemented by the exact
//! [`Extended`] rationals so that debiasing and inf-representation roundtrips can
//! be checked without rounding.

use std::cmp::Ordering;
use std::fmt::{self, Debug, Display};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive, Zero};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Values in `(-inf, +inf]` closed under the operations the cost algebra needs.
///
/// The subtraction follows the convention `inf - inf = +inf`.
pub trait ExtendedReal: Clone + PartialOrd + Debug + Send + Sync + 'static {
    fn ext_zero() -> Self;
    fn ext_infinity() -> Self;
    fn ext_neg_infinity() -> Self;
    fn is_pos_inf(&self) -> bool;
    fn is_neg_inf(&self) -> bool;
    /// True for IEEE NaN; exact types never produce one.
    fn is_undefined(&self) -> bool {
        false
    }
    fn ext_add(&self, rhs: &Self) -> Self;
    fn ext_sub(&self, rhs: &Self) -> Self;
    fn ext_half(&self) -> Self;
    /// Multiplication by a finite nonnegative coefficient, with `0 * inf = 0`.
    fn ext_scale(&self, k: &Self) -> Self;
    fn ext_from_f64(v: f64) -> Self;
    fn ext_to_f64(&self) -> f64;

    fn is_finite_ext(&self) -> bool {
        !self.is_pos_inf() && !self.is_neg_inf() && !self.is_undefined()
    }

    fn ext_min(&self, rhs: &Self) -> Self {
        if rhs < self {
            rhs.clone()
        } else {
            self.clone()
        }
    }
}

/// Floating-point scalar used by the numerical modules.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + ScalarOperand
    + ExtendedReal
    + Default
    + Display
    + Serialize
    + DeserializeOwned
{
}

impl Real for f32 {}
impl Real for f64 {}

macro_rules! float_extended {
    ($t:ty) => {
        impl ExtendedReal for $t {
            fn ext_zero() -> Self {
                0.0
            }
            fn ext_infinity() -> Self {
                <$t>::INFINITY
            }
            fn ext_neg_infinity() -> Self {
                <$t>::NEG_INFINITY
            }
            fn is_pos_inf(&self) -> bool {
                *self == <$t>::INFINITY
            }
            fn is_neg_inf(&self) -> bool {
                *self == <$t>::NEG_INFINITY
            }
            fn is_undefined(&self) -> bool {
                self.is_nan()
            }
            fn ext_add(&self, rhs: &Self) -> Self {
                if self.is_pos_inf() || rhs.is_pos_inf() {
                    <$t>::INFINITY
                } else {
                    self + rhs
                }
            }
            fn ext_sub(&self, rhs: &Self) -> Self {
                if self.is_pos_inf() || rhs.is_neg_inf() {
                    <$t>::INFINITY
                } else {
                    self - rhs
                }
            }
            fn ext_half(&self) -> Self {
                self * 0.5
            }
            fn ext_scale(&self, k: &Self) -> Self {
                if *k == 0.0 {
                    0.0
                } else {
                    self * k
                }
            }
            fn ext_from_f64(v: f64) -> Self {
                v as $t
            }
            fn ext_to_f64(&self) -> f64 {
                *self as f64
            }
        }
    };
}

float_extended!(f32);
float_extended!(f64);

/// Exact extended value over an ordered field.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Extended<R> {
    NegInfinity,
    Finite(R),
    Infinity,
}

impl<R: Ord> PartialOrd for Extended<R> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<R: Ord> Ord for Extended<R> {
    fn cmp(&self, other: &Self) -> Ordering {
        use Extended::*;
        match (self, other) {
            (NegInfinity, NegInfinity) | (Infinity, Infinity) => Ordering::Equal,
            (NegInfinity, _) | (_, Infinity) => Ordering::Less,
            (_, NegInfinity) | (Infinity, _) => Ordering::Greater,
            (Finite(a), Finite(b)) => a.cmp(b),
        }
    }
}

impl<R: Display> Debug for Extended<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Display::fmt(self, f)
    }
}

impl<R: Display> Display for Extended<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::NegInfinity => write!(f, "-inf"),
            Extended::Finite(r) => write!(f, "{r}"),
            Extended::Infinity => write!(f, "inf"),
        }
    }
}

/// Exact extended rationals.
pub type ExactReal = Extended<BigRational>;

impl ExactReal {
    pub fn from_integer(v: i64) -> Self {
        Extended::Finite(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Extended::Finite(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }
}

impl ExtendedReal for ExactReal {
    fn ext_zero() -> Self {
        Extended::Finite(BigRational::zero())
    }
    fn ext_infinity() -> Self {
        Extended::Infinity
    }
    fn ext_neg_infinity() -> Self {
        Extended::NegInfinity
    }
    fn is_pos_inf(&self) -> bool {
        matches!(self, Extended::Infinity)
    }
    fn is_neg_inf(&self) -> bool {
        matches!(self, Extended::NegInfinity)
    }
    fn ext_add(&self, rhs: &Self) -> Self {
        use Extended::*;
        match (self, rhs) {
            (Infinity, _) | (_, Infinity) => Infinity,
            (NegInfinity, _) | (_, NegInfinity) => NegInfinity,
            (Finite(a), Finite(b)) => Finite(a + b),
        }
    }
    fn ext_sub(&self, rhs: &Self) -> Self {
        use Extended::*;
        match (self, rhs) {
            (Infinity, _) | (_, NegInfinity) => Infinity,
            (_, Infinity) | (NegInfinity, _) => NegInfinity,
            (Finite(a), Finite(b)) => Finite(a - b),
        }
    }
    fn ext_half(&self) -> Self {
        match self {
            Extended::Finite(a) => Extended::Finite(a / BigRational::from_integer(BigInt::from(2))),
            other => other.clone(),
        }
    }
    fn ext_scale(&self, k: &Self) -> Self {
        match (self, k) {
            (_, Extended::Finite(k)) if k.is_zero() => Self::ext_zero(),
            (Extended::Finite(a), Extended::Finite(k)) => Extended::Finite(a * k),
            (inf, _) => inf.clone(),
        }
    }
    fn ext_from_f64(v: f64) -> Self {
        if v == f64::INFINITY {
            Extended::Infinity
        } else if v == f64::NEG_INFINITY {
            Extended::NegInfinity
        } else {
            Extended::Finite(BigRational::from_float(v).expect("finite float"))
        }
    }
    fn ext_to_f64(&self) -> f64 {
        match self {
            Extended::NegInfinity => f64::NEG_INFINITY,
            Extended::Finite(r) => r.to_f64().unwrap_or(f64::NAN),
            Extended::Infinity => f64::INFINITY,
        }
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("representable literal")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inf_minus_inf_is_inf() {
        assert!(f64::INFINITY.ext_sub(&f64::INFINITY).is_pos_inf());
        assert!(ExactReal::Infinity.ext_sub(&ExactReal::Infinity).is_pos_inf());
        assert!(1.0f64.ext_sub(&f64::INFINITY).is_neg_inf());
    }

    #[test]
    fn zero_times_inf_is_zero() {
        assert_eq!(f64::INFINITY.ext_scale(&0.0), 0.0);
        assert_eq!(
            ExactReal::Infinity.ext_scale(&ExactReal::ext_zero()),
            ExactReal::ext_zero()
        );
    }

    #[test]
    fn exact_order() {
        let a = ExactReal::from_ratio(1, 3);
        assert!(ExactReal::NegInfinity < a);
        assert!(a < ExactReal::Infinity);
        assert!(ExactReal::from_ratio(1, 4) < a);
        assert_eq!(a.ext_half(), ExactReal::from_ratio(1, 6));
    }
}
