//! Arithmetic back ends that summation algorithms are generic over.

use std::fmt::Debug;
use std::marker::PhantomData;

use num_bigint::BigInt;

use super::{DyadicRational, FloatFormat, IntFormat, KInt, Overflow, Rounding, SimFloat};
use crate::error::{Error, Result};

/// A number system with a possibly-rounding addition.
pub trait Arith: Sync {
    type Value: Clone + PartialEq + Debug + Send + Sync;

    fn zero(&self) -> Self::Value;
    fn add(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn sub(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn is_negative(&self, a: &Self::Value) -> bool;
    fn to_exact(&self, a: &Self::Value) -> Result<DyadicRational>;

    /// `s + x + … + x` (`count` times) in one step, when the back end can do
    /// it without changing the result of sequential addition.
    fn add_repeated(
        &self,
        _s: &Self::Value,
        _x: &Self::Value,
        _count: u64,
    ) -> Option<Result<Self::Value>> {
        None
    }
}

/// Emulated floats with a fixed rounding mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FloatArith {
    pub fmt: FloatFormat,
    pub rounding: Rounding,
}

impl FloatArith {
    pub fn new(fmt: FloatFormat, rounding: Rounding) -> Self {
        FloatArith { fmt, rounding }
    }
}

impl Arith for FloatArith {
    type Value = SimFloat;

    fn zero(&self) -> SimFloat {
        SimFloat::zero(self.fmt)
    }

    #[inline]
    fn add(&self, a: &SimFloat, b: &SimFloat) -> Result<SimFloat> {
        a.add(b, self.rounding)
    }

    fn sub(&self, a: &SimFloat, b: &SimFloat) -> Result<SimFloat> {
        a.sub(b, self.rounding)
    }

    fn is_negative(&self, a: &SimFloat) -> bool {
        a.is_negative()
    }

    fn to_exact(&self, a: &SimFloat) -> Result<DyadicRational> {
        a.to_exact()
    }
}

/// `k`-bit integers; overflow behaviour comes from the format.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IntArith {
    pub fmt: IntFormat,
}

impl Arith for IntArith {
    type Value = KInt;

    fn zero(&self) -> KInt {
        self.fmt.reduce(0)
    }

    #[inline]
    fn add(&self, a: &KInt, b: &KInt) -> Result<KInt> {
        Ok(a.add(b))
    }

    fn sub(&self, a: &KInt, b: &KInt) -> Result<KInt> {
        Ok(a.sub(b))
    }

    fn is_negative(&self, a: &KInt) -> bool {
        a.value() < 0
    }

    fn to_exact(&self, a: &KInt) -> Result<DyadicRational> {
        Ok(a.to_exact())
    }

    // Wraparound is a group operation, and saturating adds of one sign clamp
    // monotonically, so the bulk result is the reduced or clamped exact sum.
    fn add_repeated(&self, s: &KInt, x: &KInt, count: u64) -> Option<Result<KInt>> {
        let total = BigInt::from(s.value()) + BigInt::from(x.value()) * BigInt::from(count);
        let min = BigInt::from(self.fmt.min_value());
        let v = match self.fmt.overflow() {
            Overflow::Wraparound => {
                let m = BigInt::from(self.fmt.modulus());
                ((total - &min) % &m + &m) % &m + min
            }
            Overflow::Saturating => total.clamp(min, BigInt::from(self.fmt.max_value())),
        };
        Some(Ok(self.fmt.reduce(i128::try_from(v).expect("in range"))))
    }
}

/// Unrounded arithmetic: the reference sum over the reals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExactArith;

impl Arith for ExactArith {
    type Value = DyadicRational;

    fn zero(&self) -> DyadicRational {
        DyadicRational::zero()
    }

    fn add(&self, a: &DyadicRational, b: &DyadicRational) -> Result<DyadicRational> {
        Ok(a + b)
    }

    fn sub(&self, a: &DyadicRational, b: &DyadicRational) -> Result<DyadicRational> {
        Ok(a - b)
    }

    fn is_negative(&self, a: &DyadicRational) -> bool {
        a.is_negative()
    }

    fn to_exact(&self, a: &DyadicRational) -> Result<DyadicRational> {
        Ok(a.clone())
    }

    fn add_repeated(
        &self,
        s: &DyadicRational,
        x: &DyadicRational,
        count: u64,
    ) -> Option<Result<DyadicRational>> {
        Some(Ok(s + &(x * &DyadicRational::from_int(count as i128))))
    }
}

/// Hardware floats through `num_traits::Float`, round-to-nearest-even only.
#[derive(Debug)]
pub struct NativeArith<T>(PhantomData<T>);

impl<T> NativeArith<T> {
    pub fn new() -> Self {
        NativeArith(PhantomData)
    }
}

impl<T> Default for NativeArith<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> Clone for NativeArith<T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T> Copy for NativeArith<T> {}

impl<T> Arith for NativeArith<T>
where
    T: num_traits::Float + Debug + Send + Sync,
{
    type Value = T;

    fn zero(&self) -> T {
        T::zero()
    }

    fn add(&self, a: &T, b: &T) -> Result<T> {
        let r = *a + *b;
        if r.is_nan() {
            return Err(Error::Arithmetic("inf + (-inf) is undefined".into()));
        }
        Ok(r)
    }

    fn sub(&self, a: &T, b: &T) -> Result<T> {
        self.add(a, &-*b)
    }

    fn is_negative(&self, a: &T) -> bool {
        *a < T::zero()
    }

    fn to_exact(&self, a: &T) -> Result<DyadicRational> {
        a.to_f64()
            .and_then(DyadicRational::from_f64)
            .ok_or_else(|| Error::Arithmetic(format!("{a:?} has no exact value")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn native_matches_emulated_binary32() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let emu = FloatArith::new(FloatFormat::BINARY32, Rounding::Banker);
        let nat = NativeArith::<f32>::new();
        let mut checked = 0;
        while checked < 200_000 {
            let a = f32::from_bits(rng.random());
            let b = f32::from_bits(rng.random());
            let Ok(r) = nat.add(&a, &b) else { continue };
            if a.is_nan() || b.is_nan() {
                continue;
            }
            let ea = SimFloat::from_bits(emu.fmt, a.to_bits() as u128).unwrap();
            let eb = SimFloat::from_bits(emu.fmt, b.to_bits() as u128).unwrap();
            let er = emu.add(&ea, &eb).unwrap();
            let expect = if r == 0.0 { 0 } else { r.to_bits() as u128 };
            assert_eq!(er.bits(), expect, "{a:e} + {b:e}");
            checked += 1;
        }
    }

    #[test]
    fn native_matches_emulated_binary64_near_cancellation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let emu = FloatArith::new(FloatFormat::BINARY64, Rounding::Banker);
        for _ in 0..100_000 {
            let a: f64 = rng.random_range(-4.0..4.0);
            let b = -a * (1.0 + rng.random_range(-1e-12..1e-12));
            let ea = SimFloat::from_f64(emu.fmt, a).unwrap();
            let eb = SimFloat::from_f64(emu.fmt, b).unwrap();
            let r = a + b;
            let got = emu.add(&ea, &eb).unwrap().bits();
            let expect = if r == 0.0 { 0 } else { r.to_bits() as u128 };
            assert_eq!(got, expect);
        }
    }
}
