//! Emulated `(k, ℓ)`-bit binary floats.
//!
//! A value has a sign bit, an `ℓ`-bit exponent field and a `k`-bit mantissa
//! laid out as in IEEE 754. Normal exponents range over
//! `[-(2^(ℓ-1) - 2), 2^(ℓ-1) - 1]`; subnormals use the minimum exponent.
//! Infinity sits on the grid one ULP above the largest finite value, so every
//! rounding mode treats it as the next representable point. NaN does not
//! exist: `inf + (-inf)` is an error. Negative zero is folded into zero.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use super::dyadic::DyadicRational;
use crate::error::{pre, Error, Result};

/// Largest supported mantissa width. The add path needs `2k + 4 < 128`.
pub const MAX_MANTISSA_BITS: u32 = 61;
pub const MAX_EXPONENT_BITS: u32 = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FloatFormat {
    k: u8,
    l: u8,
}

impl FloatFormat {
    pub const BINARY32: FloatFormat = FloatFormat { k: 23, l: 8 };
    pub const BINARY64: FloatFormat = FloatFormat { k: 52, l: 11 };

    pub fn new(mantissa_bits: u32, exponent_bits: u32) -> Result<Self> {
        if !(1..=MAX_MANTISSA_BITS).contains(&mantissa_bits) {
            return pre(format!(
                "mantissa bits must be in 1..={MAX_MANTISSA_BITS}, got {mantissa_bits}"
            ));
        }
        if !(2..=MAX_EXPONENT_BITS).contains(&exponent_bits) {
            return pre(format!(
                "exponent bits must be in 2..={MAX_EXPONENT_BITS}, got {exponent_bits}"
            ));
        }
        Ok(FloatFormat {
            k: mantissa_bits as u8,
            l: exponent_bits as u8,
        })
    }

    pub fn mantissa_bits(self) -> u32 {
        self.k as u32
    }

    pub fn exponent_bits(self) -> u32 {
        self.l as u32
    }

    pub fn emin(self) -> i32 {
        -((1i32 << (self.l - 1)) - 2)
    }

    pub fn emax(self) -> i32 {
        (1i32 << (self.l - 1)) - 1
    }

    fn bias(self) -> i32 {
        (1i32 << (self.l - 1)) - 1
    }

    pub fn total_bits(self) -> u32 {
        1 + self.k as u32 + self.l as u32
    }

    /// Largest finite value `(2 - 2^-k) * 2^emax`.
    pub fn max_finite(self) -> SimFloat {
        SimFloat {
            fmt: self,
            neg: false,
            class: FloatClass::Normal,
            exp: self.emax(),
            mant: (1u64 << self.k) - 1,
        }
    }

    pub fn min_finite(self) -> SimFloat {
        self.max_finite().negate()
    }

    pub fn zero(self) -> SimFloat {
        SimFloat::zero(self)
    }

    /// `2^(emax+1)`: where infinity sits on the rounding grid.
    pub fn inf_point(self) -> DyadicRational {
        DyadicRational::pow2(self.emax() as i64 + 1)
    }

    /// Every value of the format in increasing order, infinities excluded.
    pub fn enumerate_finite(self) -> Vec<SimFloat> {
        let mut pos = Vec::new();
        for m in 1..(1u64 << self.k) {
            pos.push(SimFloat {
                fmt: self,
                neg: false,
                class: FloatClass::Subnormal,
                exp: self.emin(),
                mant: m,
            });
        }
        for e in self.emin()..=self.emax() {
            for m in 0..(1u64 << self.k) {
                pos.push(SimFloat {
                    fmt: self,
                    neg: false,
                    class: FloatClass::Normal,
                    exp: e,
                    mant: m,
                });
            }
        }
        let mut out: Vec<SimFloat> = pos.iter().rev().map(|x| x.negate()).collect();
        out.push(self.zero());
        out.extend(pos);
        out
    }
}

impl fmt::Display for FloatFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})-float", self.k, self.l)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloatClass {
    Zero,
    Subnormal,
    Normal,
    PosInf,
    NegInf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    /// Round to nearest, ties to even mantissa.
    Banker,
    TowardZero,
    TowardPosInf,
    TowardNegInf,
}

impl Rounding {
    pub fn name(self) -> &'static str {
        match self {
            Rounding::Banker => "banker",
            Rounding::TowardZero => "rtz",
            Rounding::TowardPosInf => "toward_pos_inf",
            Rounding::TowardNegInf => "toward_neg_inf",
        }
    }
}

impl std::str::FromStr for Rounding {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "banker" | "nearest" => Ok(Rounding::Banker),
            "rtz" | "toward_zero" => Ok(Rounding::TowardZero),
            "toward_pos_inf" | "up" => Ok(Rounding::TowardPosInf),
            "toward_neg_inf" | "down" => Ok(Rounding::TowardNegInf),
            _ => Err(Error::Parse(format!("unknown rounding mode {s:?}"))),
        }
    }
}

/// A value of a [`FloatFormat`]. Zero is stored with `neg == false`,
/// `exp == 0`, `mant == 0`; infinities with `exp == 0`, `mant == 0`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SimFloat {
    fmt: FloatFormat,
    neg: bool,
    class: FloatClass,
    exp: i32,
    mant: u64,
}

impl SimFloat {
    pub fn zero(fmt: FloatFormat) -> Self {
        SimFloat {
            fmt,
            neg: false,
            class: FloatClass::Zero,
            exp: 0,
            mant: 0,
        }
    }

    pub fn inf(fmt: FloatFormat, negative: bool) -> Self {
        SimFloat {
            fmt,
            neg: negative,
            class: if negative {
                FloatClass::NegInf
            } else {
                FloatClass::PosInf
            },
            exp: 0,
            mant: 0,
        }
    }

    /// Builds a value from sign, exponent and mantissa fields.
    pub fn from_parts(
        fmt: FloatFormat,
        class: FloatClass,
        negative: bool,
        exponent: i32,
        mantissa: u64,
    ) -> Result<Self> {
        let mlim = 1u64 << fmt.k;
        match class {
            FloatClass::Zero => Ok(Self::zero(fmt)),
            FloatClass::PosInf => Ok(Self::inf(fmt, false)),
            FloatClass::NegInf => Ok(Self::inf(fmt, true)),
            FloatClass::Normal => {
                if exponent < fmt.emin() || exponent > fmt.emax() || mantissa >= mlim {
                    return pre(format!("normal fields out of range for {fmt}"));
                }
                Ok(SimFloat {
                    fmt,
                    neg: negative,
                    class,
                    exp: exponent,
                    mant: mantissa,
                })
            }
            FloatClass::Subnormal => {
                if exponent != fmt.emin() || mantissa == 0 || mantissa >= mlim {
                    return pre(format!("subnormal fields out of range for {fmt}"));
                }
                Ok(SimFloat {
                    fmt,
                    neg: negative,
                    class,
                    exp: exponent,
                    mant: mantissa,
                })
            }
        }
    }

    pub fn format(&self) -> FloatFormat {
        self.fmt
    }

    pub fn class(&self) -> FloatClass {
        self.class
    }

    pub fn exponent(&self) -> i32 {
        self.exp
    }

    pub fn mantissa(&self) -> u64 {
        self.mant
    }

    /// `-1` or `+1`; zero reports `+1`.
    pub fn sign(&self) -> i32 {
        if self.neg {
            -1
        } else {
            1
        }
    }

    pub fn is_zero(&self) -> bool {
        self.class == FloatClass::Zero
    }

    pub fn is_finite(&self) -> bool {
        !matches!(self.class, FloatClass::PosInf | FloatClass::NegInf)
    }

    pub fn is_inf(&self) -> bool {
        !self.is_finite()
    }

    /// Strictly below zero (including `-inf`).
    pub fn is_negative(&self) -> bool {
        self.neg
    }

    pub fn negate(&self) -> Self {
        if self.is_zero() {
            return *self;
        }
        let mut r = *self;
        r.neg = !r.neg;
        r.class = match r.class {
            FloatClass::PosInf => FloatClass::NegInf,
            FloatClass::NegInf => FloatClass::PosInf,
            c => c,
        };
        r
    }

    pub fn abs(&self) -> Self {
        if self.neg {
            self.negate()
        } else {
            *self
        }
    }

    /// Integer significand and exponent with `|x| = sig * 2^e`.
    fn sig_exp(&self) -> (u64, i32) {
        let k = self.fmt.k as i32;
        match self.class {
            FloatClass::Normal => ((1u64 << k) | self.mant, self.exp - k),
            FloatClass::Subnormal => (self.mant, self.fmt.emin() - k),
            _ => (0, 0),
        }
    }

    pub fn to_exact(&self) -> Result<DyadicRational> {
        if !self.is_finite() {
            return Err(Error::Arithmetic(format!(
                "{} has no exact value",
                self.to_hex()
            )));
        }
        let (s, e) = self.sig_exp();
        let v = DyadicRational::new(s, e as i64);
        Ok(if self.neg { -v } else { v })
    }

    /// ULP of a finite value: `2^(⌊log2|x|⌋ - k)`, or the subnormal spacing at zero.
    pub fn ulp(&self) -> Result<DyadicRational> {
        Ok(ulp(&self.to_exact()?, self.fmt))
    }

    /// Packed sign | exponent field | mantissa, IEEE-style.
    pub fn bits(&self) -> u128 {
        let k = self.fmt.k as u32;
        let l = self.fmt.l as u32;
        let (field, mant): (u128, u128) = match self.class {
            FloatClass::Zero => (0, 0),
            FloatClass::Subnormal => (0, self.mant as u128),
            FloatClass::Normal => ((self.exp + self.fmt.bias()) as u128, self.mant as u128),
            FloatClass::PosInf | FloatClass::NegInf => ((1u128 << l) - 1, 0),
        };
        ((self.neg as u128) << (k + l)) | (field << k) | mant
    }

    pub fn from_bits(fmt: FloatFormat, bits: u128) -> Result<Self> {
        let k = fmt.k as u32;
        let l = fmt.l as u32;
        if bits >> fmt.total_bits() != 0 {
            return Err(Error::Parse(format!(
                "bit pattern {bits:#x} wider than {} bits",
                fmt.total_bits()
            )));
        }
        let neg = (bits >> (k + l)) & 1 == 1;
        let field = ((bits >> k) & ((1u128 << l) - 1)) as i32;
        let mant = (bits & ((1u128 << k) - 1)) as u64;
        let all_ones = (1i32 << l) - 1;
        if field == all_ones {
            if mant != 0 {
                return Err(Error::Parse(format!("bit pattern {bits:#x} is a NaN")));
            }
            return Ok(Self::inf(fmt, neg));
        }
        if field == 0 {
            if mant == 0 {
                return Ok(Self::zero(fmt));
            }
            return Self::from_parts(fmt, FloatClass::Subnormal, neg, fmt.emin(), mant);
        }
        Self::from_parts(fmt, FloatClass::Normal, neg, field - fmt.bias(), mant)
    }

    /// Hex bit pattern, zero-padded to the format width.
    pub fn to_hex(&self) -> String {
        let width = self.fmt.total_bits().div_ceil(4) as usize;
        format!("0x{:0width$x}", self.bits())
    }

    pub fn from_hex(fmt: FloatFormat, s: &str) -> Result<Self> {
        let t = s.trim();
        let body = t
            .strip_prefix("0x")
            .or_else(|| t.strip_prefix("0X"))
            .ok_or_else(|| Error::Parse(format!("expected 0x-prefixed bit pattern, got {s:?}")))?;
        let bits = u128::from_str_radix(body, 16)
            .map_err(|_| Error::Parse(format!("bad hex bit pattern {s:?}")))?;
        Self::from_bits(fmt, bits)
    }

    /// Monotone integer key: `a < b` iff `key(a) < key(b)` within one format.
    fn key(&self) -> i128 {
        let mag = (self.bits() & ((1u128 << (self.fmt.total_bits() - 1)) - 1)) as i128;
        if self.neg {
            -mag
        } else {
            mag
        }
    }

    /// Adds with one rounding of the exact sum.
    pub fn add(&self, other: &SimFloat, mode: Rounding) -> Result<SimFloat> {
        debug_assert_eq!(self.fmt, other.fmt);
        match (self.is_finite(), other.is_finite()) {
            (false, false) => {
                if self.neg != other.neg {
                    return Err(Error::Arithmetic("inf + (-inf) is undefined".into()));
                }
                return Ok(*self);
            }
            (false, true) => return Ok(*self),
            (true, false) => return Ok(*other),
            _ => {}
        }
        if self.is_zero() {
            return Ok(*other);
        }
        if other.is_zero() {
            return Ok(*self);
        }
        let (x, y) = if self.sig_exp().1 >= other.sig_exp().1 {
            (self, other)
        } else {
            (other, self)
        };
        let (sa, ea) = x.sig_exp();
        let (sb, eb) = y.sig_exp();
        let d = (ea - eb) as u32;
        let guard = self.fmt.k as u32 + 3;
        let (a, b, e) = if d <= guard {
            ((sa as u128) << d, sb as u128, eb)
        } else {
            // Bits of y below the guard window only matter as a sticky bit.
            let shift = d - guard;
            let b = if shift >= 64 {
                (sb != 0) as u128
            } else {
                ((sb >> shift) | ((sb & ((1u64 << shift) - 1) != 0) as u64)) as u128
            };
            ((sa as u128) << guard, b, ea - guard as i32)
        };
        let (n, neg) = if x.neg == y.neg {
            (a + b, x.neg)
        } else if a >= b {
            (a - b, x.neg)
        } else {
            (b - a, y.neg)
        };
        Ok(round_parts(self.fmt, neg, n, e as i64, mode))
    }

    pub fn sub(&self, other: &SimFloat, mode: Rounding) -> Result<SimFloat> {
        self.add(&other.negate(), mode)
    }

    /// Reference add: exact dyadic sum, then a single rounding.
    pub fn add_via_exact(&self, other: &SimFloat, mode: Rounding) -> Result<SimFloat> {
        match (self.is_finite(), other.is_finite()) {
            (true, true) => Ok(round(
                &(self.to_exact()? + other.to_exact()?),
                self.fmt,
                mode,
            )),
            _ => self.add(other, mode),
        }
    }
}

impl PartialOrd for SimFloat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimFloat {
    fn cmp(&self, other: &Self) -> Ordering {
        self.fmt
            .cmp(&other.fmt)
            .then_with(|| self.key().cmp(&other.key()))
    }
}

impl fmt::Debug for SimFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_exact() {
            Ok(v) => write!(f, "{}[{}]", self.to_hex(), v),
            Err(_) => write!(f, "{}[{}inf]", self.to_hex(), if self.neg { "-" } else { "+" }),
        }
    }
}

impl fmt::Display for SimFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

/// Generalized ULP `2^(⌊log2|q|⌋ - k)`; at zero, the subnormal spacing.
pub fn ulp(q: &DyadicRational, fmt: FloatFormat) -> DyadicRational {
    let k = fmt.k as i64;
    match q.floor_log2() {
        Some(e) => DyadicRational::pow2(e - k),
        None => DyadicRational::pow2(fmt.emin() as i64 - k),
    }
}

/// Whether `q` is exactly a finite value of `fmt`.
pub fn is_representable(q: &DyadicRational, fmt: FloatFormat) -> bool {
    let Some(e) = q.floor_log2() else {
        return true;
    };
    let k = fmt.k as i64;
    if e > fmt.emax() as i64 {
        return false;
    }
    let lsb = e.max(fmt.emin() as i64) - k;
    q.exponent() >= lsb
}

/// Rounds an exact value into `fmt`.
pub fn round(q: &DyadicRational, fmt: FloatFormat, mode: Rounding) -> SimFloat {
    if q.is_zero() {
        return SimFloat::zero(fmt);
    }
    let neg = q.is_negative();
    let mag = q.numerator().abs();
    let mut e = q.exponent();
    let bits = mag.bits();
    let n: u128 = if bits > 124 {
        // Keep 124 leading bits and fold the rest into a sticky bit.
        let s = bits - 124;
        let sticky = mag.trailing_zeros().unwrap_or(0) < s;
        e += s as i64;
        let top: BigInt = &mag >> s as usize;
        top.to_u128().expect("124-bit value fits") | sticky as u128
    } else {
        mag.to_u128().expect("small value fits")
    };
    round_parts(fmt, neg, n, e, mode)
}

pub fn round_banker(q: &DyadicRational, fmt: FloatFormat) -> SimFloat {
    round(q, fmt, Rounding::Banker)
}

pub fn round_toward_zero(q: &DyadicRational, fmt: FloatFormat) -> SimFloat {
    round(q, fmt, Rounding::TowardZero)
}

/// Rounds toward `+inf` when `up`, else toward `-inf`.
pub fn round_directed(q: &DyadicRational, fmt: FloatFormat, up: bool) -> SimFloat {
    round(
        q,
        fmt,
        if up {
            Rounding::TowardPosInf
        } else {
            Rounding::TowardNegInf
        },
    )
}

/// Rounds `(-1)^neg * n * 2^e`. When `n` carries a jammed sticky bit, its
/// lowest bit must lie at least two places below the rounding position.
fn round_parts(fmt: FloatFormat, neg: bool, n: u128, e: i64, mode: Rounding) -> SimFloat {
    if n == 0 {
        return SimFloat::zero(fmt);
    }
    let k = fmt.k as i64;
    let emin = fmt.emin() as i64;
    let p = 127 - n.leading_zeros() as i64;
    let top = p + e;
    let mut q = if top >= emin { top - k } else { emin - k };
    let s = q - e;
    let mut sig: u128;
    if s <= 0 {
        sig = n << (-s) as u32;
    } else {
        let (quot, rem_nonzero, half_cmp) = if s > 128 {
            (0u128, true, Ordering::Less)
        } else if s == 128 {
            (0u128, true, n.cmp(&(1u128 << 127)))
        } else {
            let rem = n & ((1u128 << s) - 1);
            (n >> s, rem != 0, rem.cmp(&(1u128 << (s - 1))))
        };
        sig = quot;
        let up = match mode {
            Rounding::TowardZero => false,
            Rounding::Banker => {
                half_cmp == Ordering::Greater || (half_cmp == Ordering::Equal && sig & 1 == 1)
            }
            Rounding::TowardPosInf => rem_nonzero && !neg,
            Rounding::TowardNegInf => rem_nonzero && neg,
        };
        if up {
            sig += 1;
            if sig == 1u128 << (k + 1) {
                sig >>= 1;
                q += 1;
            }
        }
    }
    if sig == 0 {
        return SimFloat::zero(fmt);
    }
    if sig >= 1u128 << k {
        let exp = q + k;
        if exp > fmt.emax() as i64 {
            return SimFloat::inf(fmt, neg);
        }
        SimFloat {
            fmt,
            neg,
            class: FloatClass::Normal,
            exp: exp as i32,
            mant: (sig - (1u128 << k)) as u64,
        }
    } else {
        debug_assert_eq!(q, emin - k);
        SimFloat {
            fmt,
            neg,
            class: FloatClass::Subnormal,
            exp: emin as i32,
            mant: sig as u64,
        }
    }
}

/// Exact value of the largest finite float.
pub fn max_finite_exact(fmt: FloatFormat) -> DyadicRational {
    fmt.max_finite().to_exact().expect("finite")
}

/// `value * count` rounded in `mode`, used by overflow checks.
pub fn round_product(
    value: &DyadicRational,
    count: u64,
    fmt: FloatFormat,
    mode: Rounding,
) -> SimFloat {
    round(&(value * &DyadicRational::from_int(BigInt::from(count))), fmt, mode)
}

impl SimFloat {
    /// Rounds an `f64` into this format (banker's rounding).
    pub fn from_f64(fmt: FloatFormat, x: f64) -> Result<Self> {
        if x.is_infinite() {
            return Ok(Self::inf(fmt, x < 0.0));
        }
        let q = DyadicRational::from_f64(x).ok_or_else(|| Error::Parse("NaN".into()))?;
        Ok(round_banker(&q, fmt))
    }

    /// One, for convenience in tests and generators.
    pub fn one(fmt: FloatFormat) -> Self {
        round_banker(&DyadicRational::one(), fmt)
    }

    /// Exact value when finite and representable, else a precondition error.
    pub fn exact(fmt: FloatFormat, q: &DyadicRational) -> Result<Self> {
        if !is_representable(q, fmt) {
            return pre(format!("{q} is not representable in {fmt}"));
        }
        Ok(round_banker(q, fmt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f34() -> FloatFormat {
        FloatFormat::new(3, 4).unwrap()
    }

    fn d(s: &str) -> DyadicRational {
        s.parse().unwrap()
    }

    #[test]
    fn format_ranges() {
        let f = f34();
        assert_eq!(f.emin(), -6);
        assert_eq!(f.emax(), 7);
        assert_eq!(max_finite_exact(f), d("240"));
        assert_eq!(FloatFormat::BINARY64.emin(), -1022);
        assert_eq!(FloatFormat::BINARY64.emax(), 1023);
    }

    #[test]
    fn ulp_examples() {
        let f = f34();
        assert_eq!(ulp(&d("1"), f), d("2^-3"));
        assert_eq!(ulp(&d("32"), f), d("2^2"));
        assert_eq!(ulp(&d("1.5"), f), d("2^-3"));
        assert_eq!(ulp(&DyadicRational::zero(), f), d("2^-9"));
    }

    #[test]
    fn representability_examples() {
        let f = f34();
        assert!(is_representable(&d("9*2^-3"), f));
        assert!(!is_representable(&d("17*2^-4"), f));
        assert!(!is_representable(&d("17"), f));
        assert!(is_representable(&d("240"), f));
        assert!(!is_representable(&d("256"), f));
        assert!(is_representable(&d("2^-9"), f));
        assert!(!is_representable(&d("2^-10"), f));
    }

    #[test]
    fn rounding_examples() {
        let f = f34();
        let x = d("1") + d("2^-4");
        assert_eq!(round_banker(&x, f).to_exact().unwrap(), d("1"));
        assert_eq!(round_toward_zero(&x, f).to_exact().unwrap(), d("1"));
        assert_eq!(round_toward_zero(&-x.clone(), f).to_exact().unwrap(), d("-1"));
        assert_eq!(round_directed(&x, f, true).to_exact().unwrap(), d("9*2^-3"));
        assert_eq!(round_directed(&x, f, false).to_exact().unwrap(), d("1"));
        let y = d("1") + d("3*2^-4");
        assert_eq!(round_banker(&y, f).to_exact().unwrap(), d("1.25"));
    }

    #[test]
    fn overflow_to_infinity() {
        let f = f34();
        // 240 + 8 is the tie between max and the infinity grid point.
        assert!(round_banker(&d("248"), f).is_inf());
        assert_eq!(round_banker(&d("247"), f), f.max_finite());
        assert_eq!(round_toward_zero(&d("255"), f), f.max_finite());
        assert!(round_toward_zero(&d("256"), f).is_inf());
        assert!(round_directed(&d("241"), f, true).is_inf());
        assert_eq!(round_directed(&d("-241"), f, true), f.min_finite());
        assert!(round_directed(&d("-241"), f, false).is_inf());
    }

    #[test]
    fn add_examples() {
        let f = f34();
        let a = SimFloat::exact(f, &d("16")).unwrap();
        let b = SimFloat::exact(f, &d("1.125")).unwrap();
        assert_eq!(a.add(&b, Rounding::Banker).unwrap().to_exact().unwrap(), d("18"));
        assert_eq!(a.add(&b, Rounding::TowardZero).unwrap().to_exact().unwrap(), d("16"));
        let inf = SimFloat::inf(f, false);
        assert!(inf.add(&inf.negate(), Rounding::Banker).is_err());
        assert_eq!(inf.add(&a, Rounding::Banker).unwrap(), inf);
    }

    #[test]
    fn smallest_subnormal() {
        let f = f34();
        let s = SimFloat::from_bits(f, 1).unwrap();
        assert_eq!(s.class(), FloatClass::Subnormal);
        assert_eq!(s.to_exact().unwrap(), d("2^-9"));
    }

    #[test]
    fn hex_roundtrip_and_nan_rejection() {
        let f = f34();
        for x in f.enumerate_finite() {
            assert_eq!(SimFloat::from_hex(f, &x.to_hex()).unwrap(), x);
        }
        assert!(SimFloat::from_hex(f, "0x79").is_err());
        assert_eq!(SimFloat::from_hex(f, "0x80").unwrap(), f.zero());
        assert_eq!(SimFloat::one(f).to_hex(), "0x38");
    }

    #[test]
    fn ordering_matches_values() {
        let all = f34().enumerate_finite();
        for w in all.windows(2) {
            assert!(w[0] < w[1]);
            assert!(w[0].to_exact().unwrap() < w[1].to_exact().unwrap());
        }
    }
}
