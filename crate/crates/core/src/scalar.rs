//! Scalar abstractions.
//!
//! Branching activities only need ordered floating point arithmetic, so the
//! solver is generic over [`Activity`] (`f32` or `f64`). Evaluation metrics
//! are ratios of counts and are generic over [`MetricScalar`], which admits
//! exact rationals as well as floats.

use std::fmt::Debug;

use num_rational::Ratio;
use std::ops::Sub;

use num_traits::{Float, One, ToPrimitive};

/// Floating point type used for VSIDS and clause activities.
pub trait Activity: Float + Debug + Send + Sync + 'static {
    /// Threshold above which all activities are rescaled.
    fn rescale_limit() -> Self;

    fn from_f64(value: f64) -> Self {
        <Self as num_traits::NumCast>::from(value).expect("finite activity constant")
    }
}

impl Activity for f64 {
    fn rescale_limit() -> Self {
        1e100
    }
}

impl Activity for f32 {
    fn rescale_limit() -> Self {
        1e20
    }
}

/// Scalar in which propagation ratios are computed.
pub trait MetricScalar: Clone + PartialOrd + Debug + One + Sub<Output = Self> {
    fn from_counts(numerator: u64, denominator: u64) -> Self;
    /// Mean of two values.
    fn midpoint(a: &Self, b: &Self) -> Self;
    fn to_f64(&self) -> f64;
}

macro_rules! impl_metric_float {
    ($t:ty) => {
        impl MetricScalar for $t {
            fn from_counts(numerator: u64, denominator: u64) -> Self {
                numerator as $t / denominator as $t
            }

            fn midpoint(a: &Self, b: &Self) -> Self {
                (a + b) / 2.0
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }
        }
    };
}

impl_metric_float!(f32);
impl_metric_float!(f64);

macro_rules! impl_metric_ratio {
    ($t:ty) => {
        impl MetricScalar for Ratio<$t> {
            fn from_counts(numerator: u64, denominator: u64) -> Self {
                Ratio::new(numerator as $t, denominator as $t)
            }

            fn midpoint(a: &Self, b: &Self) -> Self {
                (a + b) / Ratio::from_integer(2)
            }

            fn to_f64(&self) -> f64 {
                self.numer().to_f64().unwrap() / self.denom().to_f64().unwrap()
            }
        }
    };
}

impl_metric_ratio!(u64);
impl_metric_ratio!(u128);
impl_metric_ratio!(i128);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_midpoint() {
        let a = Ratio::<u128>::from_counts(1, 3);
        let b = Ratio::<u128>::from_counts(1, 2);
        assert_eq!(MetricScalar::midpoint(&a, &b), Ratio::new(5, 12));
    }

    #[test]
    fn float_from_counts() {
        assert_eq!(<f64 as MetricScalar>::from_counts(1, 4), 0.25);
        assert_eq!(MetricScalar::to_f64(&Ratio::<u64>::from_counts(2, 4)), 0.5);
    }
}
