//! Floating-point scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the models are generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + FromStr
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Absolute tolerance under which two split costs count as tied.
    const TIE_EPS: f64;

    /// Converts an `f64` literal into this scalar.
    #[inline]
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable as scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }

    #[inline]
    fn of_usize(value: usize) -> Self {
        Self::from_usize(value).expect("count representable as scalar")
    }

    /// Whether `a` and `b` are equal up to [`Scalar::TIE_EPS`], scaled by magnitude
    /// once the values exceed one.
    #[inline]
    fn tied(a: Self, b: Self) -> bool {
        let scale = Self::one().max(a.abs()).max(b.abs());
        (a - b).abs() <= Self::of(Self::TIE_EPS) * scale
    }
}

impl Scalar for f64 {
    const TIE_EPS: f64 = 1e-12;
}

impl Scalar for f32 {
    const TIE_EPS: f64 = 1e-5;
}

/// Total order for sorting scalars that are known not to be NaN.
#[inline]
pub(crate) fn total_cmp<T: Scalar>(a: &T, b: &T) -> std::cmp::Ordering {
    a.partial_cmp(b).unwrap_or_else(|| a.is_nan().cmp(&b.is_nan()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_scale_with_magnitude() {
        assert!(f64::tied(1.0, 1.0 + 5e-13));
        assert!(!f64::tied(1.0, 1.0 + 1e-10));
        assert!(f64::tied(1e6, 1e6 + 1e-7));
        assert!(f32::tied(100.0, 100.0002));
    }

    #[test]
    fn nan_sorts_last() {
        let mut v = vec![2.0, f64::NAN, 1.0];
        v.sort_by(total_cmp);
        assert_eq!(v[0], 1.0);
        assert!(v[2].is_nan());
    }
}
