//! `k`-bit integers with wraparound or saturating overflow.

use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use super::dyadic::DyadicRational;
use crate::error::{pre, Error, Result};

pub const MAX_INT_BITS: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overflow {
    Wraparound,
    Saturating,
}

impl std::str::FromStr for Overflow {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wraparound" | "wrap" | "modular" => Ok(Overflow::Wraparound),
            "saturating" | "saturate" | "sat" => Ok(Overflow::Saturating),
            _ => Err(Error::Parse(format!("unknown overflow mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntFormat {
    bits: u8,
    signed: bool,
    overflow: Overflow,
}

impl IntFormat {
    pub fn new(bits: u32, signed: bool, overflow: Overflow) -> Result<Self> {
        if !(1..=MAX_INT_BITS).contains(&bits) || (signed && bits < 2) {
            return pre(format!("integer width must be in 1..={MAX_INT_BITS} (2 if signed), got {bits}"));
        }
        Ok(IntFormat {
            bits: bits as u8,
            signed,
            overflow,
        })
    }

    pub fn bits(self) -> u32 {
        self.bits as u32
    }

    pub fn signed(self) -> bool {
        self.signed
    }

    pub fn overflow(self) -> Overflow {
        self.overflow
    }

    pub fn with_overflow(self, overflow: Overflow) -> Self {
        IntFormat { overflow, ..self }
    }

    /// `min(T)`.
    pub fn min_value(self) -> i128 {
        if self.signed {
            -(1i128 << (self.bits - 1))
        } else {
            0
        }
    }

    /// `max(T)`.
    pub fn max_value(self) -> i128 {
        if self.signed {
            (1i128 << (self.bits - 1)) - 1
        } else {
            (1i128 << self.bits) - 1
        }
    }

    /// The modulus `2^k`.
    pub fn modulus(self) -> i128 {
        1i128 << self.bits
    }

    pub fn contains(self, v: i128) -> bool {
        (self.min_value()..=self.max_value()).contains(&v)
    }

    pub fn value(self, v: i128) -> Result<KInt> {
        KInt::new(self, v)
    }

    /// Reduces an arbitrary integer into range according to the overflow mode.
    pub fn reduce(self, v: i128) -> KInt {
        let value = match self.overflow {
            Overflow::Wraparound => self.min_value() + (v - self.min_value()).rem_euclid(self.modulus()),
            Overflow::Saturating => v.clamp(self.min_value(), self.max_value()),
        };
        KInt { fmt: self, value }
    }

    pub fn enumerate(self) -> impl Iterator<Item = KInt> {
        (self.min_value()..=self.max_value()).map(move |value| KInt { fmt: self, value })
    }
}

impl fmt::Display for IntFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.signed { "i" } else { "u" };
        let o = match self.overflow {
            Overflow::Wraparound => "wrap",
            Overflow::Saturating => "sat",
        };
        write!(f, "{s}{}-{o}", self.bits)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KInt {
    fmt: IntFormat,
    value: i128,
}

impl KInt {
    pub fn new(fmt: IntFormat, value: i128) -> Result<Self> {
        if !fmt.contains(value) {
            return pre(format!("{value} out of range for {fmt}"));
        }
        Ok(KInt { fmt, value })
    }

    pub fn format(&self) -> IntFormat {
        self.fmt
    }

    pub fn value(&self) -> i128 {
        self.value
    }

    /// Addition under the format's overflow mode. Widths up to 64 bits
    /// cannot overflow the `i128` intermediate.
    pub fn add(&self, other: &KInt) -> KInt {
        debug_assert_eq!(self.fmt, other.fmt);
        self.fmt.reduce(self.value + other.value)
    }

    pub fn sub(&self, other: &KInt) -> KInt {
        self.fmt.reduce(self.value - other.value)
    }

    pub fn to_exact(&self) -> DyadicRational {
        DyadicRational::from_int(BigInt::from(self.value))
    }

    pub fn parse(fmt: IntFormat, s: &str) -> Result<Self> {
        let v: i128 = s
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("not an integer: {s:?}")))?;
        Self::new(fmt, v)
    }
}

impl fmt::Display for KInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// Cyclic distance `min{(x - y) mod m, (y - x) mod m}`.
pub fn d_mod(x: i128, y: i128, m: i128) -> i128 {
    let a = (x - y).rem_euclid(m);
    a.min(m - a)
}
