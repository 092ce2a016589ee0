//! Scalar abstraction shared by every numeric module.
//!
//! The engine's math is written once, generically, and instantiated at
//! `f64` for the correlation/ranking paths (see the crate-root aliases)
//! while file payloads stay 32-bit. Anything that is [`num_traits::Float`]
//! plus the usual conversion traits qualifies, which in practice means
//! `f32` and `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the engine operates on.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum<Self>
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum<T>
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` constant into the working scalar.
#[inline]
pub fn real<R: Scalar>(v: f64) -> R {
    R::from_f64(v).expect("finite f64 constant")
}

/// Converts a count into the working scalar.
#[inline]
pub fn count<R: Scalar>(n: usize) -> R {
    R::from_usize(n).expect("count representable as scalar")
}

/// Reads a scalar back out as `f64`, for serialization and reporting.
#[inline]
pub fn wide<R: Scalar>(v: R) -> f64 {
    v.to_f64().expect("scalar convertible to f64")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip_for_both_widths() {
        let a: f32 = real(0.25);
        let b: f64 = real(0.25);
        assert_eq!(wide(a), 0.25);
        assert_eq!(wide(b), 0.25);
        assert_eq!(count::<f64>(11), 11.0);
    }

    fn generic_mean<R: Scalar>(xs: &[R]) -> R {
        xs.iter().copied().sum::<R>() / count(xs.len())
    }

    #[test]
    fn generic_code_instantiates_at_f32_and_f64() {
        assert_eq!(generic_mean(&[1.0f32, 2.0, 3.0]), 2.0);
        assert_eq!(generic_mean(&[1.0f64, 2.0, 3.0]), 2.0);
    }
}
