//! Bit-exact number systems: emulated floats, `k`-bit integers, exact dyadics.

mod arith;
mod dyadic;
mod float;
mod int;

use std::fmt::Debug;
use std::hash::Hash;

pub use arith::{Arith, ExactArith, FloatArith, IntArith, NativeArith};
pub use dyadic::{parse_decimal, DyadicRational};
pub use float::{
    is_representable, max_finite_exact, round, round_banker, round_directed, round_product,
    round_toward_zero, ulp, FloatClass, FloatFormat, Rounding, SimFloat, MAX_EXPONENT_BITS,
    MAX_MANTISSA_BITS,
};
pub use int::{d_mod, IntFormat, KInt, Overflow, MAX_INT_BITS};

use crate::error::Result;

/// A dataset element type with a finite format and a text encoding.
pub trait Element: Copy + Eq + Hash + Ord + Debug + Send + Sync + 'static {
    type Format: Copy + Eq + Debug + Send + Sync;

    fn format(&self) -> Self::Format;
    fn to_exact(&self) -> Result<DyadicRational>;
    fn is_negative(&self) -> bool;
    fn encode(&self) -> String;
    fn decode(fmt: Self::Format, s: &str) -> Result<Self>;
    /// The exactly-representable element equal to `q`, if any.
    fn from_exact(fmt: Self::Format, q: &DyadicRational) -> Result<Self>;
}

impl Element for SimFloat {
    type Format = FloatFormat;

    fn format(&self) -> FloatFormat {
        SimFloat::format(self)
    }

    fn to_exact(&self) -> Result<DyadicRational> {
        SimFloat::to_exact(self)
    }

    fn is_negative(&self) -> bool {
        SimFloat::is_negative(self)
    }

    fn encode(&self) -> String {
        self.to_hex()
    }

    fn decode(fmt: FloatFormat, s: &str) -> Result<Self> {
        SimFloat::from_hex(fmt, s)
    }

    fn from_exact(fmt: FloatFormat, q: &DyadicRational) -> Result<Self> {
        SimFloat::exact(fmt, q)
    }
}

impl Element for KInt {
    type Format = IntFormat;

    fn format(&self) -> IntFormat {
        KInt::format(self)
    }

    fn to_exact(&self) -> Result<DyadicRational> {
        Ok(KInt::to_exact(self))
    }

    fn is_negative(&self) -> bool {
        self.value() < 0
    }

    fn encode(&self) -> String {
        self.value().to_string()
    }

    fn decode(fmt: IntFormat, s: &str) -> Result<Self> {
        KInt::parse(fmt, s)
    }

    fn from_exact(fmt: IntFormat, q: &DyadicRational) -> Result<Self> {
        let v = q
            .to_i128()
            .ok_or_else(|| crate::error::Error::Precondition(format!("{q} is not a {fmt} value")))?;
        KInt::new(fmt, v)
    }
}
