//! Exact dyadic rationals `m * 2^e`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// An exact value `numerator * 2^exponent`.
///
/// Always canonical: the numerator is odd, or zero with exponent zero.
/// That makes structural equality coincide with numeric equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DyadicRational {
    num: BigInt,
    exp: i64,
}

impl DyadicRational {
    pub fn new(num: impl Into<BigInt>, exp: i64) -> Self {
        let mut num = num.into();
        if num.is_zero() {
            return Self::zero();
        }
        let tz = num.trailing_zeros().unwrap_or(0);
        num >>= tz;
        DyadicRational {
            num,
            exp: exp + tz as i64,
        }
    }

    pub fn zero() -> Self {
        DyadicRational {
            num: BigInt::zero(),
            exp: 0,
        }
    }

    pub fn one() -> Self {
        Self::pow2(0)
    }

    pub fn pow2(e: i64) -> Self {
        DyadicRational {
            num: BigInt::one(),
            exp: e,
        }
    }

    pub fn from_int(v: impl Into<BigInt>) -> Self {
        Self::new(v, 0)
    }

    pub fn numerator(&self) -> &BigInt {
        &self.num
    }

    pub fn exponent(&self) -> i64 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.num.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.num.is_positive()
    }

    pub fn signum(&self) -> i32 {
        match self.num.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    pub fn abs(&self) -> Self {
        DyadicRational {
            num: self.num.abs(),
            exp: self.exp,
        }
    }

    pub fn is_integer(&self) -> bool {
        self.exp >= 0 || self.is_zero()
    }

    /// `⌊log2 |x|⌋`, or `None` for zero.
    pub fn floor_log2(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.num.bits() as i64 - 1 + self.exp)
        }
    }

    /// `⌈log2 |x|⌉`, or `None` for zero.
    pub fn ceil_log2(&self) -> Option<i64> {
        let f = self.floor_log2()?;
        // Canonical numerator is odd, so |x| is a power of two iff |num| == 1.
        Some(if self.num.abs().is_one() { f } else { f + 1 })
    }

    /// Multiply by `2^e` exactly.
    pub fn mul_pow2(&self, e: i64) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        DyadicRational {
            num: self.num.clone(),
            exp: self.exp + e,
        }
    }

    /// Largest integer `<= self`.
    pub fn floor(&self) -> BigInt {
        if self.exp >= 0 {
            &self.num << self.exp as usize
        } else {
            self.num.div_floor(&(BigInt::one() << (-self.exp) as usize))
        }
    }

    /// Smallest integer `>= self`.
    pub fn ceil(&self) -> BigInt {
        -(-self).floor()
    }

    /// Exact conversion to an integer, if integral.
    pub fn to_bigint(&self) -> Option<BigInt> {
        if self.is_integer() {
            Some(self.floor())
        } else {
            None
        }
    }

    pub fn to_i128(&self) -> Option<i128> {
        self.to_bigint()?.to_i128()
    }

    pub fn to_rational(&self) -> BigRational {
        if self.exp >= 0 {
            BigRational::from_integer(&self.num << self.exp as usize)
        } else {
            BigRational::new(self.num.clone(), BigInt::one() << (-self.exp) as usize)
        }
    }

    /// Smallest dyadic `>= q` whose denominator is at most `2^prec`.
    pub fn ceil_rational(q: &BigRational, prec: u32) -> Self {
        let scaled = q * BigRational::from_integer(BigInt::one() << prec as usize);
        Self::new(scaled.ceil().to_integer(), -(prec as i64))
    }

    /// Nearest `f64`, for display and sampling only.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.num.bits() as i64;
        let shift = (bits - 60).max(0);
        let top = (&self.num >> shift as usize).to_f64().unwrap_or(f64::NAN);
        let e = self.exp + shift;
        let e = e.clamp(-2000, 2000) as i32;
        // Split the scaling so subnormal results are not flushed early.
        top * 2f64.powi(e / 2) * 2f64.powi(e - e / 2)
    }

    /// Exact conversion from a finite `f64`.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        if x == 0.0 {
            return Some(Self::zero());
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1i64 } else { 1 };
        let ef = ((bits >> 52) & 0x7ff) as i64;
        let frac = (bits & ((1u64 << 52) - 1)) as i64;
        let (m, e) = if ef == 0 {
            (frac, -1074)
        } else {
            (frac | (1 << 52), ef - 1075)
        };
        Some(Self::new(sign * m, e))
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }
}

impl Default for DyadicRational {
    fn default() -> Self {
        Self::zero()
    }
}

fn align(a: &DyadicRational, b: &DyadicRational) -> (BigInt, BigInt, i64) {
    let e = a.exp.min(b.exp);
    let x = &a.num << (a.exp - e) as usize;
    let y = &b.num << (b.exp - e) as usize;
    (x, y, e)
}

impl Add for &DyadicRational {
    type Output = DyadicRational;
    fn add(self, rhs: &DyadicRational) -> DyadicRational {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let (x, y, e) = align(self, rhs);
        DyadicRational::new(x + y, e)
    }
}

impl Sub for &DyadicRational {
    type Output = DyadicRational;
    fn sub(self, rhs: &DyadicRational) -> DyadicRational {
        self + &(-rhs)
    }
}

impl Mul for &DyadicRational {
    type Output = DyadicRational;
    fn mul(self, rhs: &DyadicRational) -> DyadicRational {
        DyadicRational::new(&self.num * &rhs.num, self.exp + rhs.exp)
    }
}

impl Neg for &DyadicRational {
    type Output = DyadicRational;
    fn neg(self) -> DyadicRational {
        DyadicRational {
            num: -&self.num,
            exp: self.exp,
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for DyadicRational {
            type Output = DyadicRational;
            fn $m(self, rhs: DyadicRational) -> DyadicRational {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&DyadicRational> for DyadicRational {
            type Output = DyadicRational;
            fn $m(self, rhs: &DyadicRational) -> DyadicRational {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for DyadicRational {
    type Output = DyadicRational;
    fn neg(self) -> DyadicRational {
        -&self
    }
}

impl std::iter::Sum for DyadicRational {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |a, b| &a + &b)
    }
}

impl Ord for DyadicRational {
    fn cmp(&self, other: &Self) -> Ordering {
        let (x, y, _) = align(self, other);
        x.cmp(&y)
    }
}

impl PartialOrd for DyadicRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<i64> for DyadicRational {
    fn from(v: i64) -> Self {
        Self::from_int(v)
    }
}

impl From<i128> for DyadicRational {
    fn from(v: i128) -> Self {
        Self::from_int(v)
    }
}

impl From<BigInt> for DyadicRational {
    fn from(v: BigInt) -> Self {
        Self::from_int(v)
    }
}

/// Canonical text form `m*2^e`.
impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*2^{}", self.num, self.exp)
    }
}

impl fmt::Debug for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (~{:e})", self, self.to_f64())
    }
}

/// Accepts `m*2^e`, plain integers, and terminating decimals such as `-0.375`.
impl FromStr for DyadicRational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::Parse(format!("not an exact dyadic value: {s:?}"));
        if let Some((m, e)) = t.split_once("*2^") {
            let m: BigInt = m.trim().parse().map_err(|_| bad())?;
            let e: i64 = e.trim().trim_matches(|c| c == '(' || c == ')').parse().map_err(|_| bad())?;
            return Ok(Self::new(m, e));
        }
        if let Some(e) = t.strip_prefix("2^") {
            let e: i64 = e.trim_matches(|c| c == '(' || c == ')').parse().map_err(|_| bad())?;
            return Ok(Self::pow2(e));
        }
        let q = parse_decimal(t).ok_or_else(bad)?;
        let d = q.denom();
        let tz = d.trailing_zeros().unwrap_or(0);
        if !(d >> tz as usize).is_one() {
            return Err(bad());
        }
        Ok(Self::new(q.numer().clone(), -(tz as i64)))
    }
}

/// Parses an exact decimal or fraction (`0.5`, `-3`, `1/3`) into a rational.
pub fn parse_decimal(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let n: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let d = num_traits::pow(BigInt::from(10u32), frac_part.len());
    let q = BigRational::new(n, d);
    Some(if neg { -q } else { q })
}
