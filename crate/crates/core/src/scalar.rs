//! Scalar abstraction used by the exact oracles.
//!
//! The combinatorial oracles (matrix-tree determinants, tree and erasure
//! laws, loop masses) are written once against [`Scalar`] and run either in
//! floating point or in exact rational arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    /// Lossless for rationals (binary expansion of the float), rounding for floats.
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    /// Magnitude used for pivot selection.
    fn magnitude(&self) -> f64 {
        self.to_f64().abs()
    }
    /// True when arithmetic is exact, so any nonzero pivot is acceptable.
    fn is_exact() -> bool;
    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_f64(num as f64) / Self::from_f64(den as f64)
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_exact() -> bool {
        false
    }
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
    fn is_exact() -> bool {
        false
    }
}

impl Scalar for BigRational {
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite weight")
    }
    fn to_f64(&self) -> f64 {
        self.to_f64_lossy()
    }
    fn magnitude(&self) -> f64 {
        self.abs().to_f64_lossy()
    }
    fn is_exact() -> bool {
        true
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
}

trait LossyF64 {
    fn to_f64_lossy(&self) -> f64;
}

impl LossyF64 for BigRational {
    fn to_f64_lossy(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| {
            // numerator/denominator too large for direct conversion
            let n = self.numer().bits() as i64;
            let d = self.denom().bits() as i64;
            let shift = n.max(d) - 1000;
            let scale = BigInt::one() << (shift.max(0) as usize);
            let num = (self.numer() / &scale).to_f64().unwrap_or(f64::NAN);
            let den = (self.denom() / &scale).to_f64().unwrap_or(f64::NAN);
            num / den
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_from_float_is_exact() {
        let q = BigRational::from_f64(0.25);
        assert_eq!(q, BigRational::from_ratio(1, 4));
        assert_eq!(Scalar::to_f64(&q), 0.25);
    }

    #[test]
    fn float_is_not_exact() {
        assert!(!f64::is_exact());
        assert!(BigRational::is_exact());
    }
}
