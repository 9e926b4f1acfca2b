//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type usable for MDP tables, occupancies and rewards.
///
/// Implemented for `f32` and `f64`. Tolerances passed around as `f64`
/// literals are converted through [`Scalar::tol`], which never lets a
/// tolerance drop below a few hundred machine epsilons of the target type.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal into this type.
    fn lit(v: f64) -> Self;

    /// Converts a tolerance, clamped from below by the type's precision.
    fn tol(v: f64) -> Self {
        Self::lit(v).max(Self::epsilon() * Self::lit(256.0))
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    #[inline]
    fn lit(v: f64) -> Self {
        v
    }
}

impl Scalar for f32 {
    #[inline]
    fn lit(v: f64) -> Self {
        v as f32
    }
}

/// `x * ln(x)` with the `0 * ln 0 = 0` convention.
pub(crate) fn xlogx<T: Scalar>(x: T) -> T {
    if x <= T::zero() {
        T::zero()
    } else {
        x * x.ln()
    }
}

/// Numerically stable `ln(sum(exp(v)))`.
pub(crate) fn log_sum_exp<T: Scalar>(v: &[T]) -> T {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let s: T = v.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_is_clamped_for_single_precision() {
        assert_eq!(<f64 as Scalar>::tol(1e-12), 1e-12);
        assert!(<f32 as Scalar>::tol(1e-12) > 1e-6);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = [1000.0f64, 1000.0];
        assert!((log_sum_exp(&v) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp::<f64>(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }
}
