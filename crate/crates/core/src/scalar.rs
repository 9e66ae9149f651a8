//! Scalar abstraction for probability-valued data.
//!
//! Behaviors and the chain machinery are written once over [`Real`] so they
//! run on `f32`/`f64` as well as on exact rationals, where the classical
//! bound and the decomposition engine can be checked without round-off.

use std::fmt::{Debug, Display};

use num_rational::{BigRational, Ratio};
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// A real scalar usable as a probability or a Bell coefficient.
pub trait Real:
    Clone + Debug + Display + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Values at or below this magnitude are treated as an exact zero when
    /// deciding on division-by-zero branches. Exact types use zero.
    fn zero_clamp() -> Self;

    fn is_negligible(&self) -> bool {
        self.abs() <= Self::zero_clamp()
    }

    /// `self` with negligible magnitudes snapped to zero.
    fn clamped(self) -> Self {
        if self.is_negligible() {
            Self::zero()
        } else {
            self
        }
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }
}

impl Real for f64 {
    fn zero_clamp() -> Self {
        1e-12
    }
}

impl Real for f32 {
    fn zero_clamp() -> Self {
        1e-6
    }
}

impl Real for Ratio<i64> {
    fn zero_clamp() -> Self {
        Self::zero()
    }
}

impl Real for BigRational {
    fn zero_clamp() -> Self {
        Self::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_behaviour() {
        assert_eq!(5e-13_f64.clamped(), 0.0);
        assert_eq!(1e-9_f64.clamped(), 1e-9);
        let tiny = Ratio::new(1i64, 1_000_000_000_000_000);
        assert_eq!(tiny.clamped(), tiny);
        assert!(Ratio::<i64>::zero().is_negligible());
    }

    #[test]
    fn counts_convert() {
        assert_eq!(<f64 as Real>::from_count(3), 3.0);
        assert_eq!(BigRational::from_count(4), BigRational::from_integer(4.into()));
    }
}
