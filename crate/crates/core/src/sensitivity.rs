//! Sensitivity of bounded sums: idealized values, upper bounds for the
//! implemented algorithms, an exhaustive brute-force oracle, cheap attack
//! lower bounds, and a configuration recommender.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{pre, Error, Result};
use crate::metrics::{distance_slices, Distance, Metric};
use crate::numeric::{
    d_mod, is_representable, ulp, DyadicRational, Element, FloatFormat, IntFormat, KInt, Overflow,
    Rounding, SimFloat,
};
use crate::summation::{
    check_multiplication, float_overflow_check, iterative, kahan, pairwise, Algorithm, SumElement,
    SumMethod, Transform,
};

/// Element format of a spec.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElementFormat {
    Float(FloatFormat),
    Int(IntFormat),
}

impl fmt::Display for ElementFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementFormat::Float(x) => write!(f, "{x}"),
            ElementFormat::Int(x) => write!(f, "{x}"),
        }
    }
}

/// Accepts the display forms `(k,l)-float` and `u8-wrap` / `i32-sat`, plus
/// `binary32` and `binary64`.
impl std::str::FromStr for ElementFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || {
            Error::Parse(format!(
                "format: {s:?} is not one of (k,l)-float, binary32, binary64, u<bits>-wrap, i<bits>-sat"
            ))
        };
        match t {
            "binary32" => return Ok(ElementFormat::Float(FloatFormat::BINARY32)),
            "binary64" => return Ok(ElementFormat::Float(FloatFormat::BINARY64)),
            _ => {}
        }
        if let Some(body) = t.strip_suffix("-float") {
            let (k, l) = body
                .strip_prefix('(')
                .and_then(|b| b.strip_suffix(')'))
                .and_then(|b| b.split_once(','))
                .ok_or_else(bad)?;
            let k = k.trim().parse().map_err(|_| bad())?;
            let l = l.trim().parse().map_err(|_| bad())?;
            return Ok(ElementFormat::Float(FloatFormat::new(k, l)?));
        }
        let (head, mode) = t.split_once('-').ok_or_else(bad)?;
        let signed = match head.chars().next() {
            Some('u') => false,
            Some('i') => true,
            _ => return Err(bad()),
        };
        let bits = head[1..].parse().map_err(|_| bad())?;
        let overflow: Overflow = mode.parse().map_err(|_| bad())?;
        Ok(ElementFormat::Int(IntFormat::new(bits, signed, overflow)?))
    }
}

/// Everything that determines a bounded-sum sensitivity question.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SensSpec {
    pub format: ElementFormat,
    pub lower: DyadicRational,
    pub upper: DyadicRational,
    pub metric: Metric,
    /// Dataset length for `co`/`ham`; maximum length explored for `sym`/`id`.
    pub n: Option<u64>,
    pub method: SumMethod,
}

impl SensSpec {
    pub fn new(
        format: ElementFormat,
        lower: DyadicRational,
        upper: DyadicRational,
        metric: Metric,
        n: Option<u64>,
        method: SumMethod,
    ) -> Result<Self> {
        if lower > upper {
            return pre(format!("lower: L = {lower} exceeds U = {upper}"));
        }
        if metric.known_n() && n.is_none() {
            return pre(format!("n: metric {metric} needs a dataset length"));
        }
        match format {
            ElementFormat::Float(f) => {
                SimFloat::exact(f, &lower)
                    .map_err(|_| Error::Precondition(format!("lower: {lower} is not a {f} value")))?;
                SimFloat::exact(f, &upper)
                    .map_err(|_| Error::Precondition(format!("upper: {upper} is not a {f} value")))?;
                if method.algorithm == Algorithm::SplitInt {
                    return Err(Error::Unsupported("split_int on floats".into()));
                }
            }
            ElementFormat::Int(f) => {
                KInt::from_exact(f, &lower)
                    .map_err(|_| Error::Precondition(format!("lower: {lower} is not a {f} value")))?;
                KInt::from_exact(f, &upper)
                    .map_err(|_| Error::Precondition(format!("upper: {upper} is not a {f} value")))?;
                if method.algorithm == Algorithm::SplitFloatRtz {
                    return Err(Error::Unsupported("split_float_rtz on integers".into()));
                }
            }
        }
        Ok(SensSpec {
            format,
            lower,
            upper,
            metric,
            n,
            method,
        })
    }

    /// `max{|L|, U}`.
    pub fn max_abs(&self) -> DyadicRational {
        self.lower.abs().max(self.upper.abs())
    }

    /// `U - L`.
    pub fn width(&self) -> DyadicRational {
        &self.upper - &self.lower
    }

    /// Longest dataset the summation can see: `n` for known-length metrics,
    /// capped by any truncation.
    pub fn effective_n(&self) -> Option<u64> {
        let cap = self.method.truncation();
        match (self.metric.known_n(), self.n, cap) {
            (true, Some(n), Some(c)) => Some(n.min(c)),
            (true, Some(n), None) => Some(n),
            (_, _, Some(c)) => Some(c),
            _ => None,
        }
    }

    /// Metric the summation is analysed under: a random permutation turns
    /// unordered adjacency into ordered adjacency through a coupling.
    pub fn analysis_metric(&self) -> Metric {
        if self.method.permuted() {
            self.metric.ordered_counterpart()
        } else {
            self.metric
        }
    }

    /// Truncation after reordering-sensitive inputs is only meaningful when
    /// a permutation happens first.
    fn check_transform_order(&self) -> Result<()> {
        let t = &self.method.transforms;
        let trunc = t.iter().position(|x| matches!(x, Transform::Truncate { .. }));
        let perm = t
            .iter()
            .position(|x| matches!(x, Transform::RandomPermutation { .. }));
        if let (false, Some(ti)) = (self.metric.is_ordered(), trunc) {
            if !perm.is_some_and(|p| p < ti) {
                return Err(Error::Unsupported(format!(
                    "truncation under {} needs a random permutation before it",
                    self.metric
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Idealized,
    ImplementedUpper,
    AttackLower,
    BruteForceExact,
    Modular,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::Idealized => "idealized",
            BoundKind::ImplementedUpper => "implemented_upper",
            BoundKind::AttackLower => "attack_lower",
            BoundKind::BruteForceExact => "brute_force_exact",
            BoundKind::Modular => "modular",
        }
    }
}

/// A sensitivity value with how it was obtained.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SensitivityBound {
    pub value: DyadicRational,
    pub kind: BoundKind,
    pub source: String,
}

impl SensitivityBound {
    fn new(value: DyadicRational, kind: BoundKind, source: impl Into<String>) -> Self {
        SensitivityBound {
            value,
            kind,
            source: source.into(),
        }
    }
}

/// Sensitivity of the bounded sum over exact arithmetic.
///
/// Unknown-length metrics give `max{|L|, U}`, or `max{|L|, U, U-L}` once the
/// sum is truncated; known-length metrics give `U - L`.
pub fn idealized_sensitivity(spec: &SensSpec) -> SensitivityBound {
    let (value, source) = if spec.metric.known_n() {
        (spec.width(), "U - L")
    } else if spec.method.truncation().is_some() {
        (spec.max_abs().max(spec.width()), "max{|L|, U, U - L} (truncated)")
    } else {
        (spec.max_abs(), "max{|L|, U}")
    };
    SensitivityBound::new(value, BoundKind::Idealized, source)
}

/// `min{⌊m/2⌋, idealized}` for wraparound integers, `m = 2^k`.
pub fn modular_sensitivity_bound(spec: &SensSpec) -> Result<SensitivityBound> {
    let ElementFormat::Int(f) = spec.format else {
        return Err(Error::Unsupported("modular sensitivity needs an integer format".into()));
    };
    if f.overflow() != Overflow::Wraparound {
        return Err(Error::Unsupported("modular sensitivity needs wraparound".into()));
    }
    let half = DyadicRational::from_int(BigInt::from(f.modulus()) / 2);
    let ideal = idealized_sensitivity(spec);
    Ok(SensitivityBound::new(
        half.min(ideal.value),
        BoundKind::Modular,
        format!("min{{floor(2^{}/2), {}}}", f.bits(), ideal.source),
    ))
}

/// Constant in the Kahan bound `(2t + C·n·t²)·n·max`.
pub const KAHAN_CONSTANT: i64 = 8;

/// Worst-case `|BS*(v) - BS(v)|` over datasets of length `n`.
pub fn accuracy_bound(
    algorithm: Algorithm,
    n: u64,
    fmt: FloatFormat,
    lower: &DyadicRational,
    upper: &DyadicRational,
) -> Result<DyadicRational> {
    let k = fmt.mantissa_bits() as i64;
    let m = lower.abs().max(upper.abs());
    let nq = DyadicRational::from_int(n);
    Ok(match algorithm {
        Algorithm::Exact => DyadicRational::zero(),
        Algorithm::Iterative => (&nq * &nq * m).mul_pow2(-(k + 1)),
        Algorithm::Pairwise => {
            if n <= 1 {
                return Ok(DyadicRational::zero());
            }
            let lg = nq.ceil_log2().expect("n > 1") as u64;
            // lg·t < 1/2  <=>  lg < 2^k
            if k < 64 && lg >= 1u64 << k {
                return pre(format!(
                    "n: pairwise bound needs ceil(log2 n)·2^-(k+1) < 1/2 (n = {n}, k = {k})"
                ));
            }
            let t = BigRational::new(BigInt::one(), BigInt::one() << (k + 1) as usize);
            let lt = t * BigInt::from(lg);
            let factor = &lt / (BigRational::one() - &lt);
            let q = factor * (nq.clone() * m.clone()).to_rational();
            let mag = (DyadicRational::from_int(lg) * nq * m)
                .floor_log2()
                .unwrap_or(0)
                - (k + 1);
            let prec = (64 - mag).max(0) as u32;
            DyadicRational::ceil_rational(&q, prec)
        }
        Algorithm::Kahan => {
            if k < 64 && n >= 1u64 << k {
                return pre(format!("n: Kahan bound needs n < 2^k (n = {n}, k = {k})"));
            }
            let two_t = DyadicRational::pow2(-k);
            let c_n_t2 = (DyadicRational::from_int(KAHAN_CONSTANT) * nq.clone())
                .mul_pow2(-2 * (k + 1));
            (two_t + c_n_t2) * nq * m
        }
        Algorithm::SplitInt | Algorithm::SplitFloatRtz => {
            return Err(Error::Unsupported(format!(
                "no accuracy bound for {}",
                algorithm.name()
            )))
        }
    })
}

fn accuracy_source(algorithm: Algorithm) -> &'static str {
    match algorithm {
        Algorithm::Iterative => "acc = n^2/2^(k+1)·max{|L|,U}",
        Algorithm::Pairwise => "acc = lt/(1-lt)·n·max{|L|,U}, l = ceil(log2 n), t = 2^-(k+1)",
        Algorithm::Kahan => "acc = (2t + 8·n·t^2)·n·max{|L|,U}, t = 2^-(k+1)",
        _ => "acc = 0",
    }
}

/// Sensitivity bound for the split round-toward-zero float sum.
/// `n = None` is the unknown-length form.
pub fn split_rtz_bound(
    fmt: FloatFormat,
    lower: &DyadicRational,
    upper: &DyadicRational,
    n: Option<u64>,
) -> DyadicRational {
    let k = fmt.mantissa_bits() as i64;
    // One side per sign; a side whose elements can only be zero drops out.
    let side = |mag: DyadicRational| -> Option<(DyadicRational, DyadicRational, DyadicRational)> {
        let c = mag.floor_log2()?;
        let b = match n {
            None => c,
            Some(n) => {
                let nm = DyadicRational::from_int(n) * mag.clone();
                c.min(nm.floor_log2().expect("nonzero") - k)
            }
        };
        let two_b = DyadicRational::pow2(b);
        let cross = two_b.clone().min(DyadicRational::pow2(c + 1));
        Some((mag, two_b, cross))
    };
    let up = if upper.is_positive() { side(upper.clone()) } else { None };
    let lo = if lower.is_negative() { side(lower.abs()) } else { None };
    let zero = DyadicRational::zero;
    match n {
        None => {
            let mut first = zero();
            let mut second = zero();
            for (mag, two_b, _) in [&up, &lo].into_iter().flatten() {
                first = first.max(two_b + mag);
                second = second.max(two_b.clone());
            }
            first + second
        }
        Some(_) => {
            let mut total = zero();
            let mut cross = zero();
            for (mag, two_b, c) in [&up, &lo].into_iter().flatten() {
                total = total + two_b + mag;
                cross = cross.max(c.clone());
            }
            total + cross
        }
    }
}

/// Upper bound on the implemented sensitivity for the spec's method.
pub fn implemented_sensitivity_bound(spec: &SensSpec) -> Result<SensitivityBound> {
    spec.check_transform_order()?;
    if spec.method.shifted() {
        return shifted_bound(spec);
    }
    match spec.format {
        ElementFormat::Int(f) => int_bound(spec, f),
        ElementFormat::Float(f) => float_bound(spec, f),
    }
}

fn shifted_bound(spec: &SensSpec) -> Result<SensitivityBound> {
    if !spec.metric.known_n() {
        return Err(Error::Unsupported(
            "shifted bounds need a known dataset length (co or ham)".into(),
        ));
    }
    let mut inner = spec.clone();
    inner.method.transforms.retain(|t| *t != Transform::ShiftBounds);
    inner.lower = DyadicRational::zero();
    inner.upper = spec.width();
    let inner = SensSpec::new(
        inner.format,
        inner.lower,
        inner.upper,
        inner.metric,
        inner.n,
        inner.method,
    )
    .map_err(|_| Error::Precondition("upper: U - L is not representable".into()))?;
    if let ElementFormat::Float(f) = spec.format {
        if !float_shift_is_exact(f, &spec.lower, &spec.upper) {
            return pre(format!(
                "lower: cannot show x - L is exact for every {f} value x in [{}, {}]",
                spec.lower, spec.upper
            ));
        }
    }
    let b = implemented_sensitivity_bound(&inner)?;
    Ok(SensitivityBound::new(
        b.value,
        b.kind,
        format!("bounds shifted to [0, U - L]; {}", b.source),
    ))
}

/// Whether `x - L` is representable for every format value `x` in `[L, U]`.
/// Small formats are enumerated; otherwise a sufficient condition is used:
/// every difference is a multiple of the finest spacing `q` in range, and
/// multiples of `q` up to `2^(k+1)·q` are representable.
fn float_shift_is_exact(f: FloatFormat, lower: &DyadicRational, upper: &DyadicRational) -> bool {
    if lower.is_zero() {
        return true;
    }
    if f.total_bits() <= 20 {
        return f.enumerate_finite().iter().all(|x| {
            let q = x.to_exact().expect("finite");
            q < *lower || q > *upper || is_representable(&(q - lower.clone()), f)
        });
    }
    let nearest = if lower.is_negative() && upper.is_positive() {
        DyadicRational::zero()
    } else {
        lower.abs().min(upper.abs())
    };
    let finest = ulp(&nearest, f);
    upper.clone() - lower.clone() <= finest.mul_pow2(f.mantissa_bits() as i64 + 1)
}

fn int_bound(spec: &SensSpec, f: IntFormat) -> Result<SensitivityBound> {
    let ideal = idealized_sensitivity(spec);
    let upper = |src: &str| {
        Ok(SensitivityBound::new(
            ideal.value.clone(),
            BoundKind::ImplementedUpper,
            format!("{src}: {}", ideal.source),
        ))
    };
    let l = spec.lower.to_i128().expect("integer bound");
    let u = spec.upper.to_i128().expect("integer bound");
    if spec.method.algorithm == Algorithm::Exact {
        return upper("exact summation");
    }
    if let Some(n) = spec.effective_n() {
        if check_multiplication(l, u, n, f) {
            return upper(&format!("checked multiplication passes for n = {n}, sums are exact"));
        }
    }
    if f.overflow() == Overflow::Wraparound {
        return modular_sensitivity_bound(spec);
    }
    let ordered = spec.analysis_metric().is_ordered();
    match spec.method.algorithm {
        Algorithm::SplitInt => upper("split summation with saturation"),
        Algorithm::Iterative if ordered && spec.method.truncation().is_none() => {
            if spec.method.permuted() {
                upper("random permutation with saturating iterative sum")
            } else {
                upper("saturating iterative sum under an ordered metric")
            }
        }
        _ => Err(Error::Unsupported(format!(
            "no bound for {} on saturating {} under {}",
            spec.method, f, spec.metric
        ))),
    }
}

fn float_bound(spec: &SensSpec, f: FloatFormat) -> Result<SensitivityBound> {
    let alg = spec.method.algorithm;
    if alg == Algorithm::Exact {
        let ideal = idealized_sensitivity(spec);
        return Ok(SensitivityBound::new(
            ideal.value,
            BoundKind::ImplementedUpper,
            format!("exact summation: {}", ideal.source),
        ));
    }
    let metric = spec.analysis_metric();
    if !metric.is_ordered() {
        return Err(Error::Unsupported(format!(
            "{} on floats under {} needs a random permutation",
            spec.method, spec.metric
        )));
    }
    let (l, u) = (&spec.lower, &spec.upper);
    if alg == Algorithm::SplitFloatRtz {
        if spec.method.truncation().is_some() {
            return Err(Error::Unsupported("split_float_rtz with truncation".into()));
        }
        let n = if metric.known_n() { spec.n } else { None };
        let v = split_rtz_bound(f, l, u, n);
        let src = if n.is_some() {
            "split RTZ, known n: 2^bU + U + 2^bL + |L| + max{min(2^bU, 2^(cU+1)), min(2^bL, 2^(cL+1))}"
        } else {
            "split RTZ, unknown n: max{2^bU + U, 2^bL + |L|} + max{2^bU, 2^bL}"
        };
        return Ok(SensitivityBound::new(v, BoundKind::ImplementedUpper, src));
    }
    if spec.method.rounding != Rounding::Banker {
        return Err(Error::Unsupported(format!(
            "accuracy bounds assume round to nearest, got {}",
            spec.method.rounding.name()
        )));
    }
    let Some(n) = spec.effective_n() else {
        return Err(Error::Unsupported(format!(
            "{} under {} needs truncation or a known n",
            spec.method, spec.metric
        )));
    };
    let acc = accuracy_bound(alg, n, f, l, u)?;
    if !float_overflow_check(l, u, n, &acc, f) {
        return pre(format!(
            "n: float overflow check fails for L = {l}, U = {u}, n = {n}"
        ));
    }
    let two_acc = acc.mul_pow2(1);
    let (base, base_src) = if metric.known_n() {
        (spec.width(), "U - L")
    } else {
        (spec.max_abs().max(spec.width()), "max{|L|, U, U - L}")
    };
    Ok(SensitivityBound::new(
        base + two_acc,
        BoundKind::ImplementedUpper,
        format!("{base_src} + 2·acc(n = {n}); {}", accuracy_source(alg)),
    ))
}

// ---------------------------------------------------------------------------
// Brute force.

/// Limit on the number of datasets the brute-force oracle evaluates.
pub const BRUTE_FORCE_LIMIT: u64 = 10_000_000;

/// Element types the brute-force oracle can enumerate.
pub trait BruteElement: SumElement {
    /// Every value in `[lo, hi]`, increasing.
    fn domain(lo: Self, hi: Self) -> Result<Vec<Self>>;
    /// Output distance: `|a - b|`, or the cyclic distance for wraparound.
    fn gap(a: &Self, b: &Self) -> Result<DyadicRational>;
    /// Whether `gap` is `|a - b|`, so extremes of a set suffice.
    fn linear_gap(&self) -> bool {
        true
    }
}

impl BruteElement for SimFloat {
    fn domain(lo: Self, hi: Self) -> Result<Vec<Self>> {
        let f = lo.format();
        if f.total_bits() > 20 {
            return Err(Error::TooLarge(format!("enumerating {f}")));
        }
        Ok(f.enumerate_finite()
            .into_iter()
            .filter(|x| *x >= lo && *x <= hi)
            .collect())
    }

    fn gap(a: &Self, b: &Self) -> Result<DyadicRational> {
        let (x, y) = (a.to_exact(), b.to_exact());
        match (x, y) {
            (Ok(x), Ok(y)) => Ok((x - y).abs()),
            _ => Err(Error::Arithmetic("a sum overflowed to infinity".into())),
        }
    }
}

impl BruteElement for KInt {
    fn domain(lo: Self, hi: Self) -> Result<Vec<Self>> {
        if hi.value() - lo.value() > 1 << 20 {
            return Err(Error::TooLarge("integer domain".into()));
        }
        Ok((lo.value()..=hi.value())
            .map(|v| lo.format().reduce(v))
            .collect())
    }

    fn gap(a: &Self, b: &Self) -> Result<DyadicRational> {
        let f = a.format();
        Ok(DyadicRational::from_int(match f.overflow() {
            Overflow::Wraparound => d_mod(a.value(), b.value(), f.modulus()),
            Overflow::Saturating => (a.value() - b.value()).abs(),
        }))
    }

    fn linear_gap(&self) -> bool {
        self.format().overflow() == Overflow::Saturating
    }
}

/// A brute-force result with the pair that realizes it.
#[derive(Clone, Debug)]
pub struct BruteForce<T> {
    pub bound: SensitivityBound,
    pub witness: Option<(Vec<T>, Vec<T>)>,
    pub evaluations: u64,
}

/// Deterministic summation of a plain slice under a method, without the
/// permutation transform (the oracle reasons about orderings directly).
fn eval<T: SumElement>(method: &SumMethod, lo: T, xs: &[T]) -> Result<T> {
    let mut xs = xs;
    for t in &method.transforms {
        if let Transform::Truncate { n_max } = t {
            xs = &xs[..xs.len().min(*n_max as usize)];
        }
    }
    let fmt = lo.format();
    let mut runs: Vec<(T, u64)> = Vec::with_capacity(xs.len());
    if method.shifted() {
        for x in xs {
            runs.push((T::shift(*x, lo)?, 1));
        }
    } else {
        runs.extend(xs.iter().map(|x| (*x, 1)));
    }
    let a = T::arith(fmt, method.rounding);
    match method.algorithm {
        Algorithm::Iterative => iterative(&a, &runs),
        Algorithm::Pairwise => pairwise(&a, &runs),
        Algorithm::Kahan => kahan(&a, &runs),
        Algorithm::SplitInt | Algorithm::SplitFloatRtz => Ok(T::split_sum(&runs, fmt)?.0),
        Algorithm::Exact => {
            let q: DyadicRational = runs.iter().map(|(x, _)| x.to_exact()).sum::<Result<_>>()?;
            T::from_exact(fmt, &q)
        }
    }
}

struct Oracle<'a, T> {
    method: SumMethod,
    lo: T,
    dom: &'a [T],
}

impl<T: BruteElement> Oracle<'_, T> {
    fn decode(&self, mut idx: u64, len: usize) -> Vec<T> {
        let d = self.dom.len() as u64;
        let mut v = vec![self.lo; len];
        for slot in v.iter_mut().rev() {
            *slot = self.dom[(idx % d) as usize];
            idx /= d;
        }
        v
    }

    /// Outputs for every vector of length `len`, in lexicographic order.
    fn all_outputs(&self, len: usize) -> Result<Vec<T>> {
        let count = (self.dom.len() as u64).pow(len as u32);
        (0..count)
            .into_par_iter()
            .map(|i| eval(&self.method, self.lo, &self.decode(i, len)))
            .collect()
    }
}

fn count_vectors(d: u64, lens: impl Iterator<Item = u32>) -> Option<u64> {
    lens.map(|l| d.checked_pow(l))
        .try_fold(0u64, |acc, x| acc.checked_add(x?))
}

struct Best<T> {
    gap: Option<DyadicRational>,
    witness: Option<(Vec<T>, Vec<T>)>,
}

impl<T: Clone> Best<T> {
    fn offer(&mut self, g: DyadicRational, w: impl FnOnce() -> (Vec<T>, Vec<T>)) {
        if self.gap.as_ref().is_none_or(|b| g > *b) {
            self.gap = Some(g);
            self.witness = Some(w());
        }
    }
}

/// Largest gap between an element of `a` and an element of `b`.
fn set_gap<T: BruteElement>(
    a: &BTreeMap<T, Vec<T>>,
    b: &BTreeMap<T, Vec<T>>,
) -> Result<Option<(DyadicRational, T, T)>> {
    let (Some((amin, _)), Some((bmin, _))) = (a.first_key_value(), b.first_key_value()) else {
        return Ok(None);
    };
    if amin.linear_gap() {
        let (amax, bmax) = (a.last_key_value().unwrap().0, b.last_key_value().unwrap().0);
        let g1 = T::gap(amax, bmin)?;
        let g2 = T::gap(bmax, amin)?;
        return Ok(Some(if g1 >= g2 { (g1, *amax, *bmin) } else { (g2, *amin, *bmax) }));
    }
    let mut best: Option<(DyadicRational, T, T)> = None;
    for x in a.keys() {
        for y in b.keys() {
            let g = T::gap(x, y)?;
            if best.as_ref().is_none_or(|b| g > b.0) {
                best = Some((g, *x, *y));
            }
        }
    }
    Ok(best)
}

/// Exact sensitivity by enumerating every dataset over `[lo, hi]`.
///
/// A random permutation is analysed through its coupling: the unpermuted
/// sum is enumerated under the ordered counterpart of the metric.
pub fn brute_force_typed<T: BruteElement>(
    spec: &SensSpec,
    lo: T,
    hi: T,
) -> Result<BruteForce<T>> {
    spec.check_transform_order()?;
    let metric = spec.analysis_metric();
    let method = spec.method.without_permutation();
    let dom = T::domain(lo, hi)?;
    let d = dom.len() as u64;
    let max_len = match (spec.n, spec.method.truncation()) {
        (Some(n), _) => n,
        (None, Some(c)) if !metric.known_n() => c + 1,
        _ => return pre("n: brute force needs a dataset length"),
    } as usize;
    let lens: Vec<u32> = if metric.known_n() {
        vec![max_len as u32]
    } else {
        (0..=max_len as u32).collect()
    };
    let evaluations = count_vectors(d, lens.iter().copied())
        .filter(|&c| c <= BRUTE_FORCE_LIMIT)
        .ok_or_else(|| {
            Error::TooLarge(format!(
                "brute force over {d} values up to length {max_len} exceeds {BRUTE_FORCE_LIMIT} evaluations"
            ))
        })?;
    let o = Oracle {
        method,
        lo,
        dom: &dom,
    };
    let mut outs: HashMap<usize, Vec<T>> = HashMap::new();
    for &l in &lens {
        outs.insert(l as usize, o.all_outputs(l as usize)?);
    }
    let mut best = Best {
        gap: None,
        witness: None,
    };
    match metric {
        Metric::Ham => {
            let n = max_len;
            let out = &outs[&n];
            for p in 0..n {
                let stride = d.pow((n - 1 - p) as u32);
                for base in 0..d.pow(n as u32) {
                    if (base / stride) % d != 0 {
                        continue;
                    }
                    let line: BTreeMap<T, Vec<T>> = (0..d)
                        .rev()
                        .map(|z| {
                            let i = base + z * stride;
                            (out[i as usize], vec![])
                        })
                        .collect();
                    if let Some((g, a, b)) = set_gap(&line, &line)? {
                        let find = |v: T| {
                            let z = (0..d)
                                .find(|z| out[(base + z * stride) as usize] == v)
                                .unwrap();
                            o.decode(base + z * stride, n)
                        };
                        best.offer(g, || (find(a), find(b)));
                    }
                }
            }
        }
        Metric::Id => {
            for &l in &lens[..lens.len() - 1] {
                let l = l as usize;
                let (short, long) = (&outs[&l], &outs[&(l + 1)]);
                for ui in 0..d.pow(l as u32) {
                    let fu = short[ui as usize];
                    for pos in 0..=l {
                        // Inserting digit z at `pos` of a base-d number.
                        let hi_part = ui / d.pow((l - pos) as u32);
                        let lo_part = ui % d.pow((l - pos) as u32);
                        for z in 0..d {
                            let vi = (hi_part * d + z) * d.pow((l - pos) as u32) + lo_part;
                            let g = T::gap(&fu, &long[vi as usize])?;
                            best.offer(g, || (o.decode(ui, l), o.decode(vi, l + 1)));
                        }
                    }
                }
            }
            best.offer(DyadicRational::zero(), || (vec![], vec![]));
        }
        Metric::Sym | Metric::Co => {
            // Group every ordering by histogram; keep one vector per output.
            let mut groups: BTreeMap<Vec<T>, BTreeMap<T, Vec<T>>> = BTreeMap::new();
            for &l in &lens {
                let out = &outs[&(l as usize)];
                for (i, fv) in out.iter().enumerate() {
                    let v = o.decode(i as u64, l as usize);
                    let mut key = v.clone();
                    key.sort();
                    groups.entry(key).or_default().entry(*fv).or_insert(v);
                }
            }
            // Reorderings of one histogram are at distance 0.
            for outs_h in groups.values() {
                if let Some((g, a, b)) = set_gap(outs_h, outs_h)? {
                    best.offer(g, || (outs_h[&a].clone(), outs_h[&b].clone()));
                }
            }
            // Histograms with one element removed, each distinct element once.
            fn parents<T: Clone + PartialEq>(h: &[T]) -> Vec<Vec<T>> {
                (0..h.len())
                    .filter(|&i| i == 0 || h[i] != h[i - 1])
                    .map(|i| {
                        let mut p = h.to_vec();
                        p.remove(i);
                        p
                    })
                    .collect()
            }
            if metric == Metric::Sym {
                for (h2, outs_2) in &groups {
                    for h in parents(h2) {
                        let outs_h = &groups[&h];
                        if let Some((g, a, b)) = set_gap(outs_h, outs_2)? {
                            best.offer(g, || (outs_h[&a].clone(), outs_2[&b].clone()));
                        }
                    }
                }
            } else {
                // Two histograms of one length differ in one element exactly
                // when they share a sub-histogram one shorter.
                let mut shared: BTreeMap<Vec<T>, BTreeMap<T, Vec<T>>> = BTreeMap::new();
                for (h, outs_h) in &groups {
                    for p in parents(h) {
                        let e = shared.entry(p).or_default();
                        for (y, w) in outs_h {
                            e.entry(*y).or_insert_with(|| w.clone());
                        }
                    }
                }
                for outs in shared.values() {
                    if let Some((g, a, b)) = set_gap(outs, outs)? {
                        best.offer(g, || (outs[&a].clone(), outs[&b].clone()));
                    }
                }
            }
        }
    }
    let value = best.gap.unwrap_or_else(DyadicRational::zero);
    Ok(BruteForce {
        bound: SensitivityBound::new(
            value,
            BoundKind::BruteForceExact,
            format!(
                "exhaustive over {d} values, lengths {:?}, metric {metric}",
                lens
            ),
        ),
        witness: best.witness,
        evaluations,
    })
}

/// Brute force with the witness encoded as text.
pub fn brute_force_sensitivity(spec: &SensSpec) -> Result<BruteForce<String>> {
    fn enc<T: Element>(r: BruteForce<T>) -> BruteForce<String> {
        let e = |v: Vec<T>| v.iter().map(|x| x.encode()).collect();
        BruteForce {
            bound: r.bound,
            witness: r.witness.map(|(a, b)| (e(a), e(b))),
            evaluations: r.evaluations,
        }
    }
    Ok(match spec.format {
        ElementFormat::Float(f) => enc(brute_force_typed(
            spec,
            SimFloat::exact(f, &spec.lower)?,
            SimFloat::exact(f, &spec.upper)?,
        )?),
        ElementFormat::Int(f) => enc(brute_force_typed(
            spec,
            KInt::from_exact(f, &spec.lower)?,
            KInt::from_exact(f, &spec.upper)?,
        )?),
    })
}

// ---------------------------------------------------------------------------
// Attack lower bounds.

/// Largest gap realized by a list of candidate pairs that are adjacent under
/// the spec (permutations handled as in the brute force).
pub fn attack_lower_typed<T: BruteElement>(
    spec: &SensSpec,
    lo: T,
    hi: T,
    extra: &[(Vec<T>, Vec<T>)],
) -> Result<SensitivityBound> {
    spec.check_transform_order()?;
    let metric = spec.analysis_metric();
    let method = spec.method.without_permutation();
    let mut cands = canonical_pairs(spec, lo, hi);
    cands.extend(extra.iter().cloned());
    let max_len = spec.n.or(spec.method.truncation().map(|c| c + 1));
    let mut best = (DyadicRational::zero(), String::from("empty datasets"));
    for (u, v) in cands {
        let fits = |w: &[T]| {
            w.iter().all(|x| *x >= lo && *x <= hi)
                && match (metric.known_n(), spec.n) {
                    (true, Some(n)) => w.len() as u64 == n,
                    _ => max_len.is_none_or(|m| w.len() as u64 <= m),
                }
        };
        if !fits(&u) || !fits(&v) {
            continue;
        }
        if !matches!(distance_slices(metric, &u, &v), Distance::Finite(0 | 1)) {
            continue;
        }
        let (Ok(a), Ok(b)) = (eval(&method, lo, &u), eval(&method, lo, &v)) else {
            continue;
        };
        let Ok(g) = T::gap(&a, &b) else { continue };
        if g > best.0 {
            best = (g, format!("pair of lengths {} and {}", u.len(), v.len()));
        }
    }
    Ok(SensitivityBound::new(best.0, BoundKind::AttackLower, best.1))
}

fn canonical_pairs<T: BruteElement>(spec: &SensSpec, lo: T, hi: T) -> Vec<(Vec<T>, Vec<T>)> {
    let zero = T::from_exact(lo.format(), &DyadicRational::zero()).ok();
    let mut vals = vec![lo, hi];
    vals.extend(zero.filter(|z| *z >= lo && *z <= hi));
    let mut out = Vec::new();
    let lens: Vec<usize> = match (spec.n, spec.method.truncation()) {
        (Some(n), _) => (0..=n as usize).collect(),
        (None, Some(c)) => (0..=c as usize + 1).collect(),
        (None, None) => vec![0, 1],
    };
    for &len in &lens {
        for &x in &vals {
            for &y in &vals {
                for &z in &vals {
                    let base = vec![x; len];
                    // Change one position, or append one element.
                    for pos in [0, len.saturating_sub(1)] {
                        if len > 0 {
                            let mut v = base.clone();
                            v[pos] = y;
                            out.push((base.clone(), v));
                        }
                    }
                    let mut w = base.clone();
                    w.push(y);
                    out.push((base.clone(), w));
                    // Truncation edge: [x.., y] vs [x.. (one fewer), y].
                    if len > 0 {
                        let mut a = base.clone();
                        a.push(z);
                        let mut b = vec![x; len - 1];
                        b.push(z);
                        out.push((a, b));
                    }
                }
            }
        }
    }
    out
}

pub fn attack_lower(spec: &SensSpec) -> Result<SensitivityBound> {
    let max_len = spec.n.or(spec.method.truncation().map(|c| c + 1)).unwrap_or(64);
    fn pairs<T: Element>(xs: Vec<crate::attacks::AttackInstance<T>>) -> Vec<(Vec<T>, Vec<T>)> {
        xs.into_iter().map(|i| (i.u.to_vec(), i.v.to_vec())).collect()
    }
    match spec.format {
        ElementFormat::Float(f) => attack_lower_typed(
            spec,
            SimFloat::exact(f, &spec.lower)?,
            SimFloat::exact(f, &spec.upper)?,
            &pairs(crate::attacks::float_instances(f, max_len)),
        ),
        ElementFormat::Int(f) => attack_lower_typed(
            spec,
            KInt::from_exact(f, &spec.lower)?,
            KInt::from_exact(f, &spec.upper)?,
            &pairs(crate::attacks::int_instances(f, max_len)),
        ),
    }
}

// ---------------------------------------------------------------------------
// Recommendations.

/// What the practitioner knows about the data.
#[derive(Clone, Debug)]
pub struct Constraints {
    pub lower: DyadicRational,
    pub upper: DyadicRational,
    /// Exact dataset length, when public.
    pub n: Option<u64>,
    /// Truncation length to use when `n` is not public.
    pub n_max: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct Recommendation {
    pub method: SumMethod,
    pub metric: Metric,
    pub bound: SensitivityBound,
    pub note: String,
}

/// Ordered suggestions, each with a sensitivity bound that holds for it.
pub fn recommend(format: ElementFormat, c: &Constraints) -> Result<Vec<Recommendation>> {
    let metric = if c.n.is_some() { Metric::Co } else { Metric::Sym };
    let spec = |method: SumMethod| {
        SensSpec::new(format, c.lower.clone(), c.upper.clone(), metric, c.n, method)
    };
    let perm = Transform::RandomPermutation { seed: 0 };
    let mut out = Vec::new();
    if let ElementFormat::Int(f) = format {
        if f.overflow() == Overflow::Wraparound {
            out.push(Recommendation {
                method: SumMethod::iterative(),
                metric,
                bound: modular_sensitivity_bound(&spec(SumMethod::iterative())?)?,
                note: "wraparound sum with modular noise addition".into(),
            });
        }
    }
    let mut push = |method: SumMethod, note: &str| -> Result<()> {
        let s = spec(method.clone())?;
        if let Ok(bound) = implemented_sensitivity_bound(&s) {
            out.push(Recommendation {
                method,
                metric,
                bound,
                note: note.into(),
            });
        }
        Ok(())
    };
    match format {
        ElementFormat::Int(f) => {
            let sat = ElementFormat::Int(f.with_overflow(Overflow::Saturating));
            if let Some(n) = c.n {
                let l = c.lower.to_i128().unwrap_or(0);
                let u = c.upper.to_i128().unwrap_or(0);
                if check_multiplication(l, u, n, f) {
                    push(SumMethod::iterative(), "checked parameters: n·U and n·L fit")?;
                }
            }
            let sat_spec = |method: SumMethod| {
                SensSpec::new(sat, c.lower.clone(), c.upper.clone(), metric, c.n, method)
            };
            for (method, note) in [
                (
                    SumMethod::new(Algorithm::SplitInt, Rounding::Banker),
                    "saturating split summation",
                ),
                (
                    SumMethod::iterative().with(perm),
                    "saturating iterative sum after a random permutation",
                ),
            ] {
                if let Ok(bound) = implemented_sensitivity_bound(&sat_spec(method.clone())?) {
                    out.push(Recommendation {
                        method,
                        metric,
                        bound,
                        note: format!("{note} (switch to saturating addition)"),
                    });
                }
            }
        }
        ElementFormat::Float(_) => {
            let base = SumMethod::iterative().with(perm);
            let (it, pw) = match (c.n, c.n_max) {
                (Some(_), _) => (
                    base.clone(),
                    SumMethod::new(Algorithm::Pairwise, Rounding::Banker).with(perm),
                ),
                (None, Some(m)) => (
                    base.clone().with(Transform::Truncate { n_max: m }),
                    SumMethod::new(Algorithm::Pairwise, Rounding::Banker)
                        .with(perm)
                        .with(Transform::Truncate { n_max: m }),
                ),
                (None, None) => (base.clone(), base.clone()),
            };
            push(it, "accuracy-derived bound, random permutation, truncation when n is private")?;
            push(pw, "pairwise summation for a tighter accuracy term")?;
            push(
                SumMethod::new(Algorithm::SplitFloatRtz, Rounding::TowardZero).with(perm),
                "split summation with round toward zero; constant-factor bound for any n",
            )?;
        }
    }
    Ok(out)
}

/// `bound / max{|L|, U}` (or `/ (U - L)` for known n) as an `f64`, for display.
pub fn blowup_factor(bound: &DyadicRational, ideal: &DyadicRational) -> Option<f64> {
    if ideal.is_zero() {
        return None;
    }
    (bound.to_rational() / ideal.to_rational()).to_f64()
}
