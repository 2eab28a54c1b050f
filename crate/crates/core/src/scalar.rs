//! Floating-point scalar abstraction.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar the numerical core is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("integer representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
}

/// Fractional part in `[0, 1)`.
#[inline]
pub fn frac<T: Scalar>(v: T) -> T {
    let f = v - v.floor();
    // `v - floor(v)` can round up to exactly 1 for tiny negative `v`.
    if f >= T::one() {
        T::zero()
    } else {
        f
    }
}

/// Returns `Some(k)` when `len / step` is an integer `k ≥ 1` up to a relative tolerance.
pub fn integer_ratio<T: Scalar>(len: T, step: T) -> Option<usize> {
    if !(step > T::zero()) || !(len > T::zero()) || !len.is_finite() || !step.is_finite() {
        return None;
    }
    let ratio = len / step;
    let rounded = ratio.round();
    if rounded < T::one() {
        return None;
    }
    let tol = rounded * T::lit(1e-9).max(T::lit(16.0) * T::epsilon());
    if (ratio - rounded).abs() <= tol {
        rounded.to_usize()
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frac_stays_in_unit_interval() {
        assert_eq!(frac(2.25_f64), 0.25);
        assert_eq!(frac(-0.25_f64), 0.75);
        assert!(frac(-1e-300_f64) < 1.0);
    }

    #[test]
    fn integer_ratio_detects_divisibility() {
        assert_eq!(integer_ratio(0.25e-3_f64, 1e-5), Some(25));
        assert_eq!(integer_ratio(20.0_f64, 1e-5), Some(2_000_000));
        assert_eq!(integer_ratio(1.0_f64, 0.3), None);
        assert_eq!(integer_ratio(1.0_f64, 0.0), None);
        assert_eq!(integer_ratio(0.25e-3_f32, 1e-5), Some(25));
    }
}
