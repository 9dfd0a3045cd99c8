//! Scalar abstraction for the solver kernels.
//!
//! Everything numerical is written against [`Real`] so that the same code runs
//! in `f64` and in double-double ([`DoubleDouble`]). The extended type matters
//! for unit-mass runs: the mass equation `y' = (y - 1) E` amplifies any
//! deviation from `y = 1` by `exp(∫E)`, which over a few time units exceeds
//! what 53 bits can absorb.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub use qd::Quad as DoubleDouble;

pub trait Real:
    Copy
    + PartialOrd
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Unit roundoff of the representation.
    const EPSILON: f64;

    fn of(x: f64) -> Self;
    fn to_f64_lossy(self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;

    fn zero() -> Self {
        Self::of(0.0)
    }

    fn one() -> Self {
        Self::of(1.0)
    }

    fn infinity() -> Self {
        Self::of(f64::INFINITY)
    }

    fn neg_infinity() -> Self {
        Self::of(f64::NEG_INFINITY)
    }

    fn of_usize(n: usize) -> Self {
        Self::of(n as f64)
    }

    fn abs(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }

    /// NaN-propagating is not required; a NaN argument is ignored like `f64::max`.
    fn max(self, other: Self) -> Self {
        if other > self || self.is_nan() {
            other
        } else {
            self
        }
    }

    fn min(self, other: Self) -> Self {
        if other < self || self.is_nan() {
            other
        } else {
            self
        }
    }

    fn is_nan(self) -> bool {
        self.to_f64_lossy().is_nan()
    }

    fn is_finite(self) -> bool {
        self.to_f64_lossy().is_finite()
    }
}

impl Real for f64 {
    const EPSILON: f64 = f64::EPSILON;

    fn of(x: f64) -> Self {
        x
    }
    fn to_f64_lossy(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn max(self, other: Self) -> Self {
        f64::max(self, other)
    }
    fn min(self, other: Self) -> Self {
        f64::min(self, other)
    }
}

impl Real for DoubleDouble {
    const EPSILON: f64 = f64::EPSILON * f64::EPSILON;

    fn of(x: f64) -> Self {
        DoubleDouble::from_f64(x)
    }
    fn to_f64_lossy(self) -> f64 {
        self.0 + self.1
    }
    fn sqrt(self) -> Self {
        DoubleDouble::sqrt(self)
    }
    fn exp(self) -> Self {
        DoubleDouble::exp(self)
    }
    fn ln(self) -> Self {
        DoubleDouble::ln(self)
    }
    fn is_nan(self) -> bool {
        DoubleDouble::is_nan(self)
    }
    fn is_finite(self) -> bool {
        DoubleDouble::is_finite(self)
    }
}

/// Numeric precision of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    F64,
    DoubleDouble,
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::F64 => "f64",
            Precision::DoubleDouble => "double-double",
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f64" => Ok(Precision::F64),
            "double-double" | "dd" => Ok(Precision::DoubleDouble),
            other => Err(format!("unknown precision `{other}` (expected f64 | double-double)")),
        }
    }
}

pub fn to_f64_vec<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

pub fn from_f64_vec<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::of(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_double_carries_extra_bits() {
        let one = DoubleDouble::of(1.0);
        let tiny = DoubleDouble::of(1e-20);
        let sum = one + tiny;
        assert!(((sum - one).to_f64_lossy() - 1e-20).abs() < 1e-30);
        assert_eq!(1.0f64 + 1e-20 - 1.0, 0.0);
    }

    #[test]
    fn double_double_division_is_accurate() {
        let three = DoubleDouble::of(3.0);
        let q = DoubleDouble::of(1.0) / three;
        assert!((q * three - DoubleDouble::of(1.0)).abs().to_f64_lossy() < 1e-31);
    }

    #[test]
    fn generic_helpers_agree_with_f64() {
        assert_eq!(Real::max(2.0f64, f64::NAN), 2.0);
        let a = DoubleDouble::of(-2.5);
        assert_eq!(Real::abs(a).to_f64_lossy(), 2.5);
        assert_eq!(Real::max(a, DoubleDouble::of(1.0)).to_f64_lossy(), 1.0);
        assert!((Real::ln(Real::exp(DoubleDouble::of(1.0))) - DoubleDouble::of(1.0)).abs().to_f64_lossy() < 1e-30);
    }
}
