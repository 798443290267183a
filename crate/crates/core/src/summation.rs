//! Bounded-sum algorithms and dataset transforms.
//!
//! Every algorithm consumes run-length input. Iterative and Kahan summation
//! stop expanding a run as soon as the accumulator stops changing, and
//! pairwise summation memoizes sub-ranges that fall inside one run, so attack
//! instances with millions of equal elements sum quickly.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Dataset;
use crate::numeric::{
    round, Arith, DyadicRational, Element, FloatArith, FloatFormat, IntArith, IntFormat, KInt,
    Rounding, SimFloat,
};

/// Name of the shuffle recorded in run metadata.
pub const PERMUTATION_ALGORITHM: &str = "fisher-yates (descending swap) over ChaCha20 seeded by seed_from_u64";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Iterative,
    Pairwise,
    Kahan,
    SplitInt,
    SplitFloatRtz,
    Exact,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Iterative => "iterative",
            Algorithm::Pairwise => "pairwise",
            Algorithm::Kahan => "kahan",
            Algorithm::SplitInt => "split_int",
            Algorithm::SplitFloatRtz => "split_float_rtz",
            Algorithm::Exact => "exact",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "iterative" => Algorithm::Iterative,
            "pairwise" => Algorithm::Pairwise,
            "kahan" => Algorithm::Kahan,
            "split_int" => Algorithm::SplitInt,
            "split_float_rtz" => Algorithm::SplitFloatRtz,
            "exact" => Algorithm::Exact,
            _ => return Err(Error::Parse(format!("unknown summation method {s:?}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Transform {
    Truncate { n_max: u64 },
    RandomPermutation { seed: u64 },
    ShiftBounds,
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Truncate { n_max } => write!(f, "truncate:{n_max}"),
            Transform::RandomPermutation { seed } => write!(f, "permute:{seed}"),
            Transform::ShiftBounds => f.write_str("shift"),
        }
    }
}

impl std::str::FromStr for Transform {
    type Err = Error;
    /// `truncate:N`, `permute:SEED`, or `shift`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown transform {s:?}"));
        match s.split_once(':') {
            Some(("truncate", n)) => Ok(Transform::Truncate {
                n_max: n.parse().map_err(|_| bad())?,
            }),
            Some(("permute", n)) => Ok(Transform::RandomPermutation {
                seed: n.parse().map_err(|_| bad())?,
            }),
            None if s == "shift" => Ok(Transform::ShiftBounds),
            _ => Err(bad()),
        }
    }
}

/// An algorithm, a rounding mode for floats, and transforms applied in order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SumMethod {
    pub algorithm: Algorithm,
    pub rounding: Rounding,
    pub transforms: Vec<Transform>,
}

impl SumMethod {
    pub fn new(algorithm: Algorithm, rounding: Rounding) -> Self {
        SumMethod {
            algorithm,
            rounding,
            transforms: Vec::new(),
        }
    }

    pub fn iterative() -> Self {
        Self::new(Algorithm::Iterative, Rounding::Banker)
    }

    pub fn with(mut self, t: Transform) -> Self {
        self.transforms.push(t);
        self
    }

    pub fn truncation(&self) -> Option<u64> {
        self.transforms.iter().find_map(|t| match t {
            Transform::Truncate { n_max } => Some(*n_max),
            _ => None,
        })
    }

    pub fn permuted(&self) -> bool {
        self.transforms
            .iter()
            .any(|t| matches!(t, Transform::RandomPermutation { .. }))
    }

    pub fn shifted(&self) -> bool {
        self.transforms.contains(&Transform::ShiftBounds)
    }

    /// Same method with the permutation seed replaced.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut m = self.clone();
        for t in &mut m.transforms {
            if let Transform::RandomPermutation { seed: s } = t {
                *s = seed;
            }
        }
        m
    }

    /// Same method without the permutation transform.
    pub fn without_permutation(&self) -> Self {
        let mut m = self.clone();
        m.transforms
            .retain(|t| !matches!(t, Transform::RandomPermutation { .. }));
        m
    }
}

impl fmt::Display for SumMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.algorithm.name(), self.rounding.name())?;
        for t in &self.transforms {
            write!(f, "+{t}")?;
        }
        Ok(())
    }
}

/// Parses `algorithm[/rounding][+transform...]`, the `Display` form.
/// Rounding defaults to banker, or rtz for `split_float_rtz`.
impl std::str::FromStr for SumMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split('+');
        let head = parts.next().unwrap_or_default();
        let (alg, rounding) = match head.split_once('/') {
            Some((a, r)) => (a.parse::<Algorithm>()?, Some(r.parse::<Rounding>()?)),
            None => (head.parse::<Algorithm>()?, None),
        };
        let default = if alg == Algorithm::SplitFloatRtz {
            Rounding::TowardZero
        } else {
            Rounding::Banker
        };
        let mut m = SumMethod::new(alg, rounding.unwrap_or(default));
        for t in parts {
            m.transforms.push(t.parse()?);
        }
        Ok(m)
    }
}

// ---------------------------------------------------------------------------
// Generic algorithms over (value, count) runs.

/// Left fold `((0 + x1) + x2) + …`.
pub fn iterative<A: Arith>(a: &A, runs: &[(A::Value, u64)]) -> Result<A::Value> {
    let mut s = a.zero();
    for (x, c) in runs {
        s = add_run(a, s, x, *c)?;
    }
    Ok(s)
}

fn add_run<A: Arith>(a: &A, mut s: A::Value, x: &A::Value, count: u64) -> Result<A::Value> {
    if let Some(r) = a.add_repeated(&s, x, count) {
        return r;
    }
    for _ in 0..count {
        let t = a.add(&s, x)?;
        if t == s {
            // Fixed point: the rest of the run cannot move the sum.
            break;
        }
        s = t;
    }
    Ok(s)
}

/// Recursive halving at `m = ⌊n/2⌋`, one rounded add per internal node.
pub fn pairwise<A: Arith>(a: &A, runs: &[(A::Value, u64)]) -> Result<A::Value> {
    let runs: Vec<&(A::Value, u64)> = runs.iter().filter(|r| r.1 > 0).collect();
    let mut starts = Vec::with_capacity(runs.len() + 1);
    let mut acc = 0u64;
    for r in &runs {
        starts.push(acc);
        acc += r.1;
    }
    starts.push(acc);
    if acc == 0 {
        return Ok(a.zero());
    }
    let mut memo: HashMap<(usize, u64), A::Value> = HashMap::new();
    pairwise_rec(a, &runs, &starts, 0, acc, &mut memo)
}

fn pairwise_rec<A: Arith>(
    a: &A,
    runs: &[&(A::Value, u64)],
    starts: &[u64],
    start: u64,
    len: u64,
    memo: &mut HashMap<(usize, u64), A::Value>,
) -> Result<A::Value> {
    let r = starts.partition_point(|&s| s <= start) - 1;
    if len == 1 {
        return Ok(runs[r].0.clone());
    }
    let inside = start + len <= starts[r + 1];
    if inside {
        if let Some(v) = memo.get(&(r, len)) {
            return Ok(v.clone());
        }
    }
    let m = len / 2;
    let left = pairwise_rec(a, runs, starts, start, m, memo)?;
    let right = pairwise_rec(a, runs, starts, start + m, len - m, memo)?;
    let v = a.add(&left, &right)?;
    if inside {
        memo.insert((r, len), v.clone());
    }
    Ok(v)
}

/// Compensated summation, every operation rounded by `a`.
pub fn kahan<A: Arith>(a: &A, runs: &[(A::Value, u64)]) -> Result<A::Value> {
    let mut sum = a.zero();
    let mut c = a.zero();
    for (x, count) in runs {
        for _ in 0..*count {
            let y = a.sub(x, &c)?;
            let t = a.add(&sum, &y)?;
            let c2 = a.sub(&a.sub(&t, &sum)?, &y)?;
            let same = t == sum && c2 == c;
            sum = t;
            c = c2;
            if same {
                break;
            }
        }
    }
    Ok(sum)
}

/// Separate iterative sums of the non-negative and negative elements.
pub fn split_partials<A: Arith>(a: &A, runs: &[(A::Value, u64)]) -> Result<(A::Value, A::Value)> {
    let mut p = a.zero();
    let mut n = a.zero();
    for (x, c) in runs {
        if a.is_negative(x) {
            n = add_run(a, n, x, *c)?;
        } else {
            p = add_run(a, p, x, *c)?;
        }
    }
    Ok((p, n))
}

// ---------------------------------------------------------------------------
// Element-level entry points.

/// Element types that know how to build their arithmetic and split sum.
pub trait SumElement: Element {
    type A: Arith<Value = Self>;

    fn arith(fmt: Self::Format, rounding: Rounding) -> Self::A;

    /// Split summation for this type, reporting whether a partial was clamped.
    fn split_sum(runs: &[(Self, u64)], fmt: Self::Format) -> Result<(Self, bool)>;

    /// `v - lower`, failing if it is not exactly representable.
    fn shift(v: Self, lower: Self) -> Result<Self> {
        let q = v.to_exact()? - lower.to_exact()?;
        Self::from_exact(v.format(), &q)
    }
}

impl SumElement for SimFloat {
    type A = FloatArith;

    fn arith(fmt: FloatFormat, rounding: Rounding) -> FloatArith {
        FloatArith::new(fmt, rounding)
    }

    fn split_sum(runs: &[(SimFloat, u64)], fmt: FloatFormat) -> Result<(SimFloat, bool)> {
        let rtz = FloatArith::new(fmt, Rounding::TowardZero);
        let (mut p, mut n) = split_partials(&rtz, runs)?;
        let mut clamped = false;
        if p.is_inf() {
            p = fmt.max_finite();
            clamped = true;
        }
        if n.is_inf() {
            n = fmt.min_finite();
            clamped = true;
        }
        Ok((p.add(&n, Rounding::Banker)?, clamped))
    }
}

impl SumElement for KInt {
    type A = IntArith;

    fn arith(fmt: IntFormat, _rounding: Rounding) -> IntArith {
        IntArith { fmt }
    }

    fn split_sum(runs: &[(KInt, u64)], fmt: IntFormat) -> Result<(KInt, bool)> {
        let a = IntArith { fmt };
        let (p, n) = split_partials(&a, runs)?;
        Ok((p.add(&n), false))
    }
}

fn runs_of<T: Element>(v: &Dataset<T>) -> Vec<(T, u64)> {
    v.runs().iter().map(|r| (r.value, r.count)).collect()
}

pub fn bs_exact<T: Element>(v: &Dataset<T>) -> Result<DyadicRational> {
    v.exact_sum()
}

pub fn bs_iterative<T: SumElement>(v: &Dataset<T>, rounding: Rounding) -> Result<T> {
    iterative(&T::arith(v.format(), rounding), &runs_of(v))
}

pub fn bs_pairwise<T: SumElement>(v: &Dataset<T>, rounding: Rounding) -> Result<T> {
    pairwise(&T::arith(v.format(), rounding), &runs_of(v))
}

pub fn bs_kahan<T: SumElement>(v: &Dataset<T>, rounding: Rounding) -> Result<T> {
    kahan(&T::arith(v.format(), rounding), &runs_of(v))
}

/// Split summation: integer partials in the format's overflow mode; float
/// partials with round-toward-zero, clamped to the finite range, then one
/// banker's-rounded combine.
pub fn bs_split<T: SumElement>(v: &Dataset<T>) -> Result<T> {
    Ok(T::split_sum(&runs_of(v), v.format())?.0)
}

pub fn truncate<T: Element>(v: &Dataset<T>, n_max: u64) -> Dataset<T> {
    v.prefix(n_max)
}

/// Largest dataset [`random_permutation`] will materialize.
pub const PERMUTATION_LIMIT: u64 = 1 << 26;

/// Uniform shuffle driven by ChaCha20 seeded with `seed`.
pub fn random_permutation<T: Element>(v: &Dataset<T>, seed: u64) -> Result<Dataset<T>> {
    if v.len() > PERMUTATION_LIMIT {
        return Err(Error::TooLarge(format!(
            "permuting {} elements (limit {PERMUTATION_LIMIT})",
            v.len()
        )));
    }
    let mut xs = v.to_vec();
    shuffle(&mut xs, seed);
    v.with_elements(xs)
}

/// In-place Fisher–Yates shuffle.
pub fn shuffle<T>(xs: &mut [T], seed: u64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for i in (1..xs.len()).rev() {
        let j = rng.random_range(0..=i);
        xs.swap(i, j);
    }
}

/// Subtracts `L` from every element; bounds become `[0, U - L]`.
/// Returns the shifted dataset and the element count to rescale by.
pub fn shift_bounds<T: SumElement>(v: &Dataset<T>) -> Result<(Dataset<T>, u64)> {
    let lower = v.lower();
    let zero = T::from_exact(v.format(), &DyadicRational::zero())?;
    let upper = T::shift(v.upper(), lower)
        .map_err(|_| Error::Precondition("U - L is not representable".into()))?;
    let mut out = Dataset::empty(zero, upper)?;
    for r in v.runs() {
        let s = T::shift(r.value, lower).map_err(|_| {
            Error::Precondition(format!("{:?} - L is not representable", r.value))
        })?;
        out.push_run(s, r.count)?;
    }
    Ok((out, v.len()))
}

/// The result of running a [`SumMethod`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SumOutcome<T> {
    pub value: T,
    /// With shifted bounds: `(L, n)` so the caller can add `L·n` afterwards.
    pub offset: Option<(T, u64)>,
    /// Split float summation clamped an infinite partial.
    pub clamped: bool,
}

/// Applies the transforms in order, then the algorithm.
pub fn run_method<T: SumElement>(method: &SumMethod, v: &Dataset<T>) -> Result<SumOutcome<T>> {
    let mut data = v.clone();
    let mut offset = None;
    for t in &method.transforms {
        match *t {
            Transform::Truncate { n_max } => data = truncate(&data, n_max),
            Transform::RandomPermutation { seed } => data = random_permutation(&data, seed)?,
            Transform::ShiftBounds => {
                let lower = data.lower();
                let (d, n) = shift_bounds(&data)?;
                data = d;
                offset = Some((lower, n));
            }
        }
    }
    let runs = runs_of(&data);
    let a = T::arith(data.format(), method.rounding);
    let mut clamped = false;
    let value = match method.algorithm {
        Algorithm::Iterative => iterative(&a, &runs)?,
        Algorithm::Pairwise => pairwise(&a, &runs)?,
        Algorithm::Kahan => kahan(&a, &runs)?,
        Algorithm::SplitInt | Algorithm::SplitFloatRtz => {
            let (v, c) = T::split_sum(&runs, data.format())?;
            clamped = c;
            v
        }
        Algorithm::Exact => {
            let q = data.exact_sum()?;
            T::from_exact(data.format(), &q).map_err(|_| {
                Error::Precondition(format!("exact sum {q} is not a value of the element type"))
            })?
        }
    };
    Ok(SumOutcome {
        value,
        offset,
        clamped,
    })
}

/// Exact value of a method's output, including any shift offset.
pub fn run_method_exact<T: SumElement>(method: &SumMethod, v: &Dataset<T>) -> Result<DyadicRational> {
    if method.algorithm == Algorithm::Exact {
        let mut data = v.clone();
        for t in &method.transforms {
            match *t {
                Transform::Truncate { n_max } => data = truncate(&data, n_max),
                Transform::RandomPermutation { seed } => data = random_permutation(&data, seed)?,
                Transform::ShiftBounds => {}
            }
        }
        return bs_exact(&data);
    }
    let out = run_method(method, v)?;
    let mut q = out.value.to_exact()?;
    if let Some((l, n)) = out.offset {
        q = q + l.to_exact()? * DyadicRational::from_int(n as i128);
    }
    Ok(q)
}

/// Whether `U·n ≤ max(T)` and `L·n ≥ min(T)` in unbounded integers.
pub fn check_multiplication(lower: i128, upper: i128, n: u64, fmt: IntFormat) -> bool {
    let n = BigInt::from(n);
    BigInt::from(upper) * &n <= BigInt::from(fmt.max_value())
        && BigInt::from(lower) * &n >= BigInt::from(fmt.min_value())
}

/// Rejects parameters for which a float bounded sum could overflow, given a
/// valid accuracy bound `acc` for the summation method.
pub fn float_overflow_check(
    lower: &DyadicRational,
    upper: &DyadicRational,
    n: u64,
    acc: &DyadicRational,
    fmt: FloatFormat,
) -> bool {
    let nq = DyadicRational::from_int(n as i128);
    let lo = round(&(lower * &nq), fmt, Rounding::TowardNegInf);
    let hi = round(&(upper * &nq), fmt, Rounding::TowardPosInf);
    let (Ok(lo), Ok(hi)) = (lo.to_exact(), hi.to_exact()) else {
        return false;
    };
    let lo2 = round(&(lo - acc), fmt, Rounding::TowardNegInf);
    let hi2 = round(&(hi + acc), fmt, Rounding::TowardPosInf);
    lo2.is_finite() && hi2.is_finite()
}
