//! Scalar abstraction shared by the analytic modules.
//!
//! The Markov-chain analytics and the trade-off optimizer only need field
//! arithmetic, an ordering and a floor, so they are written once against
//! [`Scalar`] and instantiated for `f32`, `f64` and exact rationals.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Numeric type usable by the analytic modules.
pub trait Scalar:
    Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Absolute tolerance for analytic identities. Zero for exact types.
    fn analytic_tol() -> Self;

    /// Slack allowed when checking inputs against their constraint box.
    fn input_tol() -> Self;

    /// Largest integer not greater than `self`.
    fn floor(&self) -> Self;

    /// Whether arithmetic on this type is exact.
    fn is_exact() -> bool {
        false
    }

    fn from_usize_lossless(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar")
    }

    /// Lossy conversion used for diagnostics only.
    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn analytic_tol() -> Self {
        1e-12
    }
    fn input_tol() -> Self {
        1e-9
    }
    fn floor(&self) -> Self {
        f64::floor(*self)
    }
}

impl Scalar for f32 {
    fn analytic_tol() -> Self {
        1e-5
    }
    fn input_tol() -> Self {
        1e-5
    }
    fn floor(&self) -> Self {
        f32::floor(*self)
    }
}

impl Scalar for BigRational {
    fn analytic_tol() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }
    fn input_tol() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }
    fn floor(&self) -> Self {
        BigRational::floor(self)
    }
    fn is_exact() -> bool {
        true
    }
}

impl Scalar for Rational64 {
    fn analytic_tol() -> Self {
        Rational64::from_integer(0)
    }
    fn input_tol() -> Self {
        Rational64::from_integer(0)
    }
    fn floor(&self) -> Self {
        Rational64::floor(self)
    }
    fn is_exact() -> bool {
        true
    }
}

pub(crate) fn two<T: Scalar>() -> T {
    T::one() + T::one()
}

/// Clamps `x` into `[lo, hi]` when it lies within the input tolerance of the
/// box, returns `None` when it is further out.
pub(crate) fn snap_into<T: Scalar>(x: &T, lo: &T, hi: Option<&T>) -> Option<T> {
    let tol = T::input_tol();
    if *x < lo.clone() - tol.clone() {
        return None;
    }
    if let Some(hi) = hi {
        if *x > hi.clone() + tol {
            return None;
        }
        if x > hi {
            return Some(hi.clone());
        }
    }
    if x < lo {
        return Some(lo.clone());
    }
    Some(x.clone())
}

/// `|a - b| <= T::analytic_tol()`.
pub fn approx_eq<T: Scalar>(a: &T, b: &T) -> bool {
    (a.clone() - b.clone()).abs() <= T::analytic_tol()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snap_accepts_small_overshoot_only() {
        assert_eq!(snap_into(&(1.0 + 1e-12), &0.0, Some(&1.0)), Some(1.0));
        assert_eq!(snap_into(&-1e-12, &0.0, Some(&1.0)), Some(0.0));
        assert_eq!(snap_into(&1.1, &0.0, Some(&1.0)), None);
        assert_eq!(snap_into(&-0.1, &0.0, None), None);
        assert_eq!(snap_into(&5.0, &0.0, None), Some(5.0));
    }

    #[test]
    fn exact_types_have_zero_tolerance() {
        let half = Rational64::new(1, 2);
        assert_eq!(
            snap_into(&half, &Rational64::from_integer(0), None),
            Some(half)
        );
        assert!(BigRational::is_exact());
        assert!(!f64::is_exact());
        assert_eq!(
            Scalar::floor(&Rational64::new(7, 2)),
            Rational64::from_integer(3)
        );
    }
}
