//! Noise mechanisms on top of bounded sums, a distinguishing experiment, the
//! likelihood bound it reports, and an exact DP check for discrete noise.
//!
//! The continuous Laplace path (`Noise::Laplace`) samples an `f64` and adds it
//! in the element format. It is a deliberately naive reference, not a secure
//! sampler.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::AttackInstance;
use crate::error::{pre, Error, Result};
use crate::metrics::Dataset;
use crate::numeric::{DyadicRational, FloatFormat, IntFormat, KInt, Overflow, Rounding, SimFloat};
use crate::sensitivity::{ElementFormat, SensSpec, SensitivityBound};
use crate::summation::{run_method, run_method_exact, SumElement};

/// Noise distribution and how it is added.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    /// Continuous Laplace, added with float addition.
    Laplace,
    /// Discrete Laplace, added exactly and clamped to the integer range.
    DiscreteLaplace,
    /// Discrete Laplace, added modulo `2^k`.
    DiscreteLaplaceMod,
}

impl Noise {
    pub fn name(self) -> &'static str {
        match self {
            Noise::Laplace => "laplace",
            Noise::DiscreteLaplace => "discrete_laplace",
            Noise::DiscreteLaplaceMod => "discrete_laplace_mod",
        }
    }
}

impl std::str::FromStr for Noise {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "laplace" => Ok(Noise::Laplace),
            "discrete_laplace" => Ok(Noise::DiscreteLaplace),
            "discrete_laplace_mod" => Ok(Noise::DiscreteLaplaceMod),
            _ => Err(Error::Parse(format!(
                "noise: unknown '{s}' (expected laplace, discrete_laplace or discrete_laplace_mod)"
            ))),
        }
    }
}

/// A bounded sum, a noise distribution, and the sensitivity it was calibrated to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MechanismSpec {
    pub sens: SensSpec,
    pub noise: Noise,
    pub scale: BigRational,
    pub epsilon: BigRational,
    pub calibration: SensitivityBound,
}

impl MechanismSpec {
    pub fn new(
        sens: SensSpec,
        noise: Noise,
        scale: BigRational,
        epsilon: BigRational,
        calibration: SensitivityBound,
    ) -> Result<Self> {
        if !scale.is_positive() {
            return pre(format!("scale: must be positive, got {scale}"));
        }
        if !epsilon.is_positive() {
            return pre(format!("epsilon: must be positive, got {epsilon}"));
        }
        match (sens.format, noise) {
            (ElementFormat::Float(_), Noise::Laplace) => {}
            (ElementFormat::Int(_), Noise::DiscreteLaplace) => {}
            (ElementFormat::Int(f), Noise::DiscreteLaplaceMod) if f.overflow() == Overflow::Wraparound => {}
            (f, n) => {
                return Err(Error::Unsupported(format!(
                    "noise: {} cannot be added to {f} values",
                    n.name()
                )))
            }
        }
        Ok(MechanismSpec {
            sens,
            noise,
            scale,
            epsilon,
            calibration,
        })
    }

    /// Scale `bound / epsilon`.
    pub fn calibrated(
        sens: SensSpec,
        noise: Noise,
        epsilon: BigRational,
        calibration: SensitivityBound,
    ) -> Result<Self> {
        if calibration.value.is_zero() {
            return pre("calibration: sensitivity bound is zero, no finite scale");
        }
        if !epsilon.is_positive() {
            return pre(format!("epsilon: must be positive, got {epsilon}"));
        }
        let scale = calibration.value.to_rational() / &epsilon;
        Self::new(sens, noise, scale, epsilon, calibration)
    }

    /// `scale >= bound / epsilon`.
    pub fn claims_dp(&self) -> bool {
        &self.scale * &self.epsilon >= self.calibration.value.to_rational()
    }

    pub fn scale_f64(&self) -> f64 {
        self.scale.to_f64().unwrap_or(f64::INFINITY)
    }
}

// ---------------------------------------------------------------------------
// Sampling.

/// `G1 - G2` with `G1, G2` geometric with success probability `1 - e^(-1/scale)`.
pub fn sample_discrete_laplace_with<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<i128> {
    if !(scale > 0.0 && scale.is_finite()) {
        return pre(format!("scale: must be positive and finite, got {scale}"));
    }
    let p = -(-1.0 / scale).exp_m1();
    let g = Geometric::new(p).map_err(|e| Error::Precondition(format!("scale: {e}")))?;
    let a = g.sample(rng) as i128;
    let b = g.sample(rng) as i128;
    Ok(a - b)
}

/// Discrete Laplace draw from a generator seeded with `seed`.
pub fn sample_discrete_laplace(scale: f64, seed: u64) -> Result<i128> {
    sample_discrete_laplace_with(scale, &mut ChaCha20Rng::seed_from_u64(seed))
}

/// `scale (E1 - E2)` with standard exponentials.
pub fn sample_laplace_with<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let a: f64 = Exp1.sample(rng);
    let b: f64 = Exp1.sample(rng);
    scale * (a - b)
}

/// `(value + noise) mod 2^k` in the format's range.
pub fn modular_noise_add(value: KInt, noise: i128) -> Result<KInt> {
    let f = value.format();
    if f.overflow() != Overflow::Wraparound {
        return pre(format!("format: modular noise needs wraparound integers, got {f}"));
    }
    let m = f.modulus();
    Ok(f.reduce(value.value() + noise.rem_euclid(m)))
}

/// `value + noise` clamped to the format's range.
pub fn saturating_noise_add(value: KInt, noise: i128) -> KInt {
    let f = value.format();
    let x = value.value().saturating_add(noise).clamp(f.min_value(), f.max_value());
    KInt::new(f, x).expect("clamped into range")
}

/// One noise sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseDraw {
    Int(i128),
    Real(f64),
}

pub fn draw_noise<R: Rng + ?Sized>(spec: &MechanismSpec, rng: &mut R) -> Result<NoiseDraw> {
    Ok(match spec.noise {
        Noise::Laplace => NoiseDraw::Real(sample_laplace_with(spec.scale_f64(), rng)),
        Noise::DiscreteLaplace | Noise::DiscreteLaplaceMod => {
            NoiseDraw::Int(sample_discrete_laplace_with(spec.scale_f64(), rng)?)
        }
    })
}

/// Element types a mechanism can release.
pub trait NoisyElement: SumElement {
    fn element_format(fmt: Self::Format) -> ElementFormat;
    fn apply_noise(spec: &MechanismSpec, value: Self, noise: NoiseDraw) -> Result<Self>;
    /// Whether the value is strictly above `threshold`.
    fn above(&self, threshold: &DyadicRational) -> bool;
}

impl NoisyElement for SimFloat {
    fn element_format(fmt: FloatFormat) -> ElementFormat {
        ElementFormat::Float(fmt)
    }

    fn apply_noise(spec: &MechanismSpec, value: Self, noise: NoiseDraw) -> Result<Self> {
        match (spec.noise, noise) {
            (Noise::Laplace, NoiseDraw::Real(y)) => {
                let n = SimFloat::from_f64(value.format(), y)?;
                value.add(&n, Rounding::Banker)
            }
            _ => Err(Error::Unsupported(format!("noise: {} on floats", spec.noise.name()))),
        }
    }

    fn above(&self, threshold: &DyadicRational) -> bool {
        match self.to_exact() {
            Ok(q) => q > *threshold,
            Err(_) => !self.is_negative(),
        }
    }
}

impl NoisyElement for KInt {
    fn element_format(fmt: IntFormat) -> ElementFormat {
        ElementFormat::Int(fmt)
    }

    fn apply_noise(spec: &MechanismSpec, value: Self, noise: NoiseDraw) -> Result<Self> {
        match (spec.noise, noise) {
            (Noise::DiscreteLaplace, NoiseDraw::Int(z)) => Ok(saturating_noise_add(value, z)),
            (Noise::DiscreteLaplaceMod, NoiseDraw::Int(z)) => modular_noise_add(value, z),
            _ => Err(Error::Unsupported(format!("noise: {} on integers", spec.noise.name()))),
        }
    }

    fn above(&self, threshold: &DyadicRational) -> bool {
        DyadicRational::from_int(self.value()) > *threshold
    }
}

/// The sensitivity question an attack instance answers: its bounds, metric,
/// target method, and the longer of its two lengths.
pub fn instance_spec<T: NoisyElement>(inst: &AttackInstance<T>) -> Result<SensSpec> {
    let lo = inst.u.lower();
    SensSpec::new(
        T::element_format(lo.format()),
        lo.to_exact()?,
        inst.u.upper().to_exact()?,
        inst.metric,
        Some(inst.u.len().max(inst.v.len())),
        inst.native.clone(),
    )
}

/// A generator for one sub-stream of `seed`.
fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Adds noise drawn from stream 0 of `seed` to an already computed sum.
pub fn release<T: NoisyElement>(spec: &MechanismSpec, sum: T, seed: u64) -> Result<T> {
    let noise = draw_noise(spec, &mut stream_rng(seed, 0))?;
    T::apply_noise(spec, sum, noise)
}

/// `BS*(dataset) + noise`. A random permutation in the method is reseeded
/// from stream 1 of `seed`; the noise comes from stream 0.
pub fn run_mechanism<T: NoisyElement>(spec: &MechanismSpec, dataset: &Dataset<T>, seed: u64) -> Result<T> {
    let method = if spec.sens.method.permuted() {
        spec.sens.method.reseeded(stream_rng(seed, 1).next_u64())
    } else {
        spec.sens.method.clone()
    };
    let out = run_method(&method, dataset)?;
    if out.offset.is_some() {
        return Err(Error::Unsupported(
            "method: shifted bounds add L·n after noise; release the shifted sum instead".into(),
        ));
    }
    release(spec, out.value, seed)
}

// ---------------------------------------------------------------------------
// Distinguishing experiment.

/// Significance level below which a likelihood bound counts as a violation.
pub const VIOLATION_LEVEL: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Violation,
    ConsistentWithEpsilon,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub trials: u64,
    /// `counts[d][o]`: dataset `d` (0 = u, 1 = v) produced threshold outcome `o`.
    pub counts: [[u64; 2]; 2],
    pub epsilon_claimed: f64,
    pub threshold: DyadicRational,
    pub log2_probability_bound: f64,
    pub verdict: Verdict,
}

/// Seed of trial `trial` on dataset `side` (0 = u, 1 = v): the first output
/// of ChaCha20 seeded with `master` on stream `2·trial + side`.
pub fn trial_seed(master: u64, trial: u64, side: u64) -> u64 {
    stream_rng(master, 2 * trial + side).next_u64()
}

/// Runs the mechanism `trials` times on each dataset and thresholds the
/// outputs. The default threshold is the midpoint of `BS*(u)` and `BS*(v)`.
pub fn distinguishing_experiment<T: NoisyElement>(
    inst: &AttackInstance<T>,
    spec: &MechanismSpec,
    threshold: Option<DyadicRational>,
    trials: u64,
    master_seed: u64,
) -> Result<ExperimentReport> {
    let method = &spec.sens.method;
    let threshold = match threshold {
        Some(t) => t,
        None => {
            let a = run_method_exact(method, &inst.u)?;
            let b = run_method_exact(method, &inst.v)?;
            (a + b).mul_pow2(-1)
        }
    };
    let fixed = if method.permuted() {
        None
    } else {
        Some((run_method(method, &inst.u)?.value, run_method(method, &inst.v)?.value))
    };
    let one = |trial: u64, side: u64| -> Result<bool> {
        let seed = trial_seed(master_seed, trial, side);
        let out = match fixed {
            Some((a, b)) => release(spec, if side == 0 { a } else { b }, seed)?,
            None => run_mechanism(spec, if side == 0 { &inst.u } else { &inst.v }, seed)?,
        };
        Ok(out.above(&threshold))
    };
    let counts = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<[[u64; 2]; 2]> {
            let mut c = [[0u64; 2]; 2];
            c[0][one(t, 0)? as usize] += 1;
            c[1][one(t, 1)? as usize] += 1;
            Ok(c)
        })
        .try_reduce(
            || [[0u64; 2]; 2],
            |a, b| Ok([[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]),
        )?;
    let eps = spec.epsilon.to_f64().unwrap_or(f64::INFINITY);
    let bound = dp_violation_log2_bound(counts, eps);
    Ok(ExperimentReport {
        trials,
        counts,
        epsilon_claimed: eps,
        threshold,
        log2_probability_bound: bound,
        verdict: if bound < VIOLATION_LEVEL.log2() {
            Verdict::Violation
        } else {
            Verdict::ConsistentWithEpsilon
        },
    })
}

// ---------------------------------------------------------------------------
// Likelihood bound.

/// `ln P[Bin(n, p) >= c]`, summing terms outward from `c` until they vanish.
fn ln_tail_ge(n: u64, c: u64, p: f64, ln_fact: &[f64]) -> f64 {
    if c == 0 {
        return 0.0;
    }
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let term = |k: u64| ln_fact[n as usize] - ln_fact[k as usize] - ln_fact[(n - k) as usize] + k as f64 * lp + (n - k) as f64 * lq;
    let mut best = f64::NEG_INFINITY;
    let mut acc = 0.0f64;
    for k in c..=n {
        let t = term(k);
        if t > best {
            acc = acc * (best - t).exp() + 1.0;
            best = t;
        } else {
            acc += (t - best).exp();
            if t < best - 60.0 {
                break;
            }
        }
    }
    best + acc.ln()
}

fn ln_tail_le(n: u64, c: u64, p: f64, ln_fact: &[f64]) -> f64 {
    ln_tail_ge(n, n - c, 1.0 - p, ln_fact)
}

/// `log2` of the largest probability, under any pair of output rates allowed
/// by ε-DP, of outcomes at least as extreme as `counts`.
///
/// `counts[d][o]` as in [`ExperimentReport`]. The dataset with the higher
/// observed rate of 1s is scored by `P[X >= observed]`, the other by
/// `P[X <= observed]`; the rates satisfy `p_u <= e^ε p_v`, `p_v <= e^ε p_u`
/// and the same for `1 - p`. For each `p_v` the best `p_u` is the largest
/// allowed one, so the search is one-dimensional: a grid, then zooming in
/// until the step is below 1e-9.
pub fn dp_violation_log2_bound(counts: [[u64; 2]; 2], epsilon: f64) -> f64 {
    let (mut nu, mut cu) = (counts[0][0] + counts[0][1], counts[0][1]);
    let (mut nv, mut cv) = (counts[1][0] + counts[1][1], counts[1][1]);
    if nu + nv == 0 {
        return 0.0;
    }
    let rate = |c: u64, n: u64| if n == 0 { 0.5 } else { c as f64 / n as f64 };
    if rate(cu, nu) < rate(cv, nv) {
        std::mem::swap(&mut nu, &mut nv);
        std::mem::swap(&mut cu, &mut cv);
    }
    let top = nu.max(nv) as usize;
    let mut ln_fact = vec![0.0f64; top + 1];
    for i in 1..=top {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    let e = epsilon.exp();
    let g = |pv: f64| {
        let pu = 1f64.min(e * pv).min(1.0 - (1.0 - pv) / e);
        ln_tail_ge(nu, cu, pu, &ln_fact) + ln_tail_le(nv, cv, pv, &ln_fact)
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = (f64::NEG_INFINITY, 0.5);
    let mut steps = 4000;
    while hi - lo > 1e-12 {
        let h = (hi - lo) / steps as f64;
        for i in 0..=steps {
            let pv = lo + h * i as f64;
            let val = g(pv);
            if val > best.0 {
                best = (val, pv);
            }
        }
        lo = (best.1 - 2.0 * h).max(0.0);
        hi = (best.1 + 2.0 * h).min(1.0);
        steps = 64;
        if h < 1e-9 {
            break;
        }
    }
    (best.0 / std::f64::consts::LN_2).min(0.0)
}

/// Closed form for `n` ones on u and `n` zeros on v: `2n log2(e^ε / (1 + e^ε))`.
pub fn separated_log2_bound(n: u64, epsilon: f64) -> f64 {
    let e = epsilon.exp();
    2.0 * n as f64 * (e / (1.0 + e)).log2()
}

// ---------------------------------------------------------------------------
// Exact DP check.

/// Rounds a positive rational to `prec` significant bits, up or down.
fn round_rel(q: &BigRational, prec: u32, up: bool) -> BigRational {
    let e = q.numer().bits() as i64 - q.denom().bits() as i64;
    let sh = prec as i64 - e;
    let pow = |s: i64| BigInt::one() << s as usize;
    let scaled = if sh >= 0 {
        q * BigRational::from_integer(pow(sh))
    } else {
        q / BigRational::from_integer(pow(-sh))
    };
    let n = if up { scaled.ceil() } else { scaled.floor() }.to_integer();
    if sh >= 0 {
        BigRational::new(n, pow(sh))
    } else {
        BigRational::from_integer(n * pow(-sh))
    }
}

/// Rational bounds `lo <= e^x <= hi` with about `prec` bits of agreement.
pub fn exp_bounds(x: &BigRational, prec: u32) -> (BigRational, BigRational) {
    if x.is_zero() {
        return (BigRational::one(), BigRational::one());
    }
    if x.is_negative() {
        let (lo, hi) = exp_bounds(&-x, prec);
        return (
            round_rel(&(BigRational::one() / hi), prec + 8, false),
            round_rel(&(BigRational::one() / lo), prec + 8, true),
        );
    }
    let half = BigRational::new(1.into(), 2.into());
    let mut s = 0u32;
    let mut t = x.clone();
    while t > half {
        t /= BigRational::from_integer(2.into());
        s += 1;
    }
    let work = prec + s + 16;
    let tiny = BigRational::new(1.into(), BigInt::one() << (work as usize));
    let mut sum = BigRational::zero();
    let mut term = BigRational::one();
    let mut i = 0u32;
    while term >= tiny {
        sum += &term;
        i += 1;
        term = term * &t / BigRational::from_integer(i.into());
    }
    // Remaining tail is at most term / (1 - t) <= 2 term.
    let mut lo = round_rel(&sum, work, false);
    let mut hi = round_rel(&(sum + term * BigRational::from_integer(2.into())), work, true);
    for _ in 0..s {
        lo = round_rel(&(&lo * &lo), work, false);
        hi = round_rel(&(&hi * &hi), work, true);
    }
    (lo, hi)
}

/// Compares `r` with `e^x` exactly (refining until the bounds separate).
pub fn compare_exp(r: &BigRational, x: &BigRational) -> Result<Ordering> {
    if x.is_zero() {
        return Ok(r.cmp(&BigRational::one()));
    }
    let mut prec = 64;
    while prec <= 8192 {
        let (lo, hi) = exp_bounds(x, prec);
        if *r < lo {
            return Ok(Ordering::Less);
        }
        if *r > hi {
            return Ok(Ordering::Greater);
        }
        prec *= 2;
    }
    Err(Error::Arithmetic(format!("could not separate {r} from e^{x}")))
}

/// Largest modulus the exact check accepts.
pub const EXACT_MODULUS_LIMIT: i128 = 1 << 16;

#[derive(Clone, Debug, PartialEq)]
pub struct DpCheck {
    /// Largest `P[M(u) = o] / P[M(v) = o]` or its inverse over outputs `o`.
    pub max_ratio: BigRational,
    pub ln_max_ratio: f64,
    pub argmax: i128,
    /// Decay `alpha >= e^(-1/scale)` used for the PMFs.
    pub alpha: BigRational,
    /// `max_ratio <= e^epsilon`, decided exactly.
    pub within: bool,
}

/// Exact output distributions of a discrete-noise mechanism on `u` and `v`,
/// compared output by output.
///
/// The PMFs use the decay `alpha`, an upper bound on `e^(-1/scale)` rounded to
/// about 96 bits, so the checked mechanism has at least the requested noise.
/// Modular noise gives `P[o] ∝ alpha^d + alpha^(m-d)` with `d = (o - s) mod m`;
/// clamped noise gives `alpha^|o-s| (1-alpha)/(1+alpha)` inside the range and
/// the tails `alpha^t / (1+alpha)` at the two ends.
pub fn exact_dp_check(
    spec: &MechanismSpec,
    u: &Dataset<KInt>,
    v: &Dataset<KInt>,
    epsilon: &BigRational,
) -> Result<DpCheck> {
    let ElementFormat::Int(fmt) = spec.sens.format else {
        return Err(Error::Unsupported("format: exact check needs integer outputs".into()));
    };
    if spec.noise == Noise::Laplace {
        return Err(Error::Unsupported("noise: exact check needs discrete noise".into()));
    }
    let m = fmt.modulus();
    if m > EXACT_MODULUS_LIMIT {
        return Err(Error::TooLarge(format!(
            "m: output support 2^{} exceeds 2^16",
            fmt.bits()
        )));
    }
    if spec.sens.method.permuted() {
        return Err(Error::Unsupported(
            "method: exact check needs a deterministic sum (no random permutation)".into(),
        ));
    }
    let a = run_method(&spec.sens.method, u)?.value.value();
    let b = run_method(&spec.sens.method, v)?.value.value();
    let x = -BigRational::one() / &spec.scale;
    let mut alpha = None;
    for prec in [96, 256, 1024] {
        let hi = exp_bounds(&x, prec).1;
        if hi < BigRational::one() {
            alpha = Some(hi);
            break;
        }
    }
    let alpha = alpha.ok_or_else(|| Error::Precondition("scale: too large for an exact check".into()))?;
    let pmf = Pmf::new(fmt, spec.noise, &alpha);
    // Screen in log space, then evaluate the leaders exactly.
    let la = alpha.to_f64().unwrap_or(0.0).ln();
    let lr: Vec<(i128, f64)> = pmf
        .outputs()
        .map(|o| (o, (pmf.ln_p(o, a, la) - pmf.ln_p(o, b, la)).abs()))
        .collect();
    let top = lr.iter().map(|x| x.1).fold(0.0f64, f64::max);
    let slack = 1e-9 * top.max(1.0);
    let mut best: Option<(BigRational, i128)> = None;
    for &(o, r) in &lr {
        if r < top - slack {
            continue;
        }
        let (pa, pb) = (pmf.p(o, a), pmf.p(o, b));
        let q = if pa >= pb { pa / pb } else { pb / pa };
        if best.as_ref().is_none_or(|(bq, _)| q > *bq) {
            best = Some((q, o));
        }
    }
    let (max_ratio, argmax) = best.unwrap_or((BigRational::one(), a));
    let within = compare_exp(&max_ratio, epsilon)? != Ordering::Greater;
    Ok(DpCheck {
        ln_max_ratio: ratio_ln(&max_ratio),
        max_ratio,
        argmax,
        alpha,
        within,
    })
}

fn ratio_ln(q: &BigRational) -> f64 {
    let e = q.numer().bits() as i64 - q.denom().bits() as i64;
    let scaled = round_rel(q, 60, false);
    let f = (scaled.numer().to_f64().unwrap_or(f64::MAX)).ln() - (scaled.denom().to_f64().unwrap_or(f64::MAX)).ln();
    if f.is_finite() {
        f
    } else {
        e as f64 * std::f64::consts::LN_2
    }
}

struct Pmf<'a> {
    fmt: IntFormat,
    noise: Noise,
    alpha: &'a BigRational,
}

impl<'a> Pmf<'a> {
    fn new(fmt: IntFormat, noise: Noise, alpha: &'a BigRational) -> Self {
        Pmf { fmt, noise, alpha }
    }

    fn outputs(&self) -> impl Iterator<Item = i128> {
        self.fmt.min_value()..=self.fmt.max_value()
    }

    fn pow(&self, e: i128) -> BigRational {
        self.alpha.pow(e as i32)
    }

    /// Unnormalized for modular noise (same constant on both sides).
    fn p(&self, o: i128, s: i128) -> BigRational {
        let one = BigRational::one();
        match self.noise {
            Noise::DiscreteLaplaceMod => {
                let m = self.fmt.modulus();
                let d = (o - s).rem_euclid(m);
                self.pow(d) + self.pow(m - d)
            }
            _ => {
                let (lo, hi) = (self.fmt.min_value(), self.fmt.max_value());
                if o == hi {
                    self.pow(hi - s) / (&one + self.alpha)
                } else if o == lo {
                    self.pow(s - lo) / (&one + self.alpha)
                } else {
                    self.pow((o - s).abs()) * (&one - self.alpha) / (&one + self.alpha)
                }
            }
        }
    }

    fn ln_p(&self, o: i128, s: i128, la: f64) -> f64 {
        match self.noise {
            Noise::DiscreteLaplaceMod => {
                let m = self.fmt.modulus();
                let d = (o - s).rem_euclid(m);
                let (x, y) = (d as f64 * la, (m - d) as f64 * la);
                x.max(y) + (x.min(y) - x.max(y)).exp().ln_1p()
            }
            _ => {
                let (lo, hi) = (self.fmt.min_value(), self.fmt.max_value());
                let ea = la.exp();
                if o == hi {
                    (hi - s) as f64 * la - ea.ln_1p()
                } else if o == lo {
                    (s - lo) as f64 * la - ea.ln_1p()
                } else {
                    (o - s).abs() as f64 * la + (1.0 - ea).ln() - ea.ln_1p()
                }
            }
        }
    }
}
