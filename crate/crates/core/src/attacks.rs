//! Adjacent dataset pairs whose implemented bounded sums differ by far more
//! than the idealized sensitivity, and a verifier that reruns them.

use std::fmt;

use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{pre, Error, Result};
use crate::metrics::{couple_co, couple_sym, distance, Dataset, Distance, Metric};
use crate::numeric::{DyadicRational, Element, FloatFormat, IntFormat, KInt, Overflow, SimFloat};
use crate::summation::{random_permutation, run_method_exact, truncate, SumElement, SumMethod, Transform};

/// Which construction produced an instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Overflow,
    OverflowHam,
    SaturationReorder,
    FloatReorder,
    Rounding,
    RepeatedRounding1,
    RepeatedRounding2,
}

impl AttackKind {
    pub const ALL: [AttackKind; 7] = [
        AttackKind::Overflow,
        AttackKind::OverflowHam,
        AttackKind::SaturationReorder,
        AttackKind::FloatReorder,
        AttackKind::Rounding,
        AttackKind::RepeatedRounding1,
        AttackKind::RepeatedRounding2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Overflow => "overflow",
            AttackKind::OverflowHam => "overflow_ham",
            AttackKind::SaturationReorder => "saturation_reorder",
            AttackKind::FloatReorder => "float_reorder",
            AttackKind::Rounding => "rounding",
            AttackKind::RepeatedRounding1 => "repeated_rounding_1",
            AttackKind::RepeatedRounding2 => "repeated_rounding_2",
        }
    }

    /// What the construction exploits and the gap it forces.
    pub fn citation(self) -> &'static str {
        match self {
            AttackKind::Overflow => {
                "iterative sum with modular addition: [U x (n-2), M] vs [U x (n-2), M, 1], n = ceil(max/U) + 1, gap 2^k - 1"
            }
            AttackKind::OverflowHam => {
                "iterative sum with modular addition, equal lengths: [U x (n-2), M, 0] vs [U x (n-2), M, 1], gap 2^k - 1"
            }
            AttackKind::SaturationReorder => {
                "iterative sum with saturating addition: [L x b, U x c] vs [U x c, L x b], gap max - min"
            }
            AttackKind::FloatReorder => {
                "non-associative float addition: [L x 2^(k+1-a), U x 2^(k+1-d)] vs its reorder, gap 2^(k+1-a-d) U"
            }
            AttackKind::Rounding => {
                "rounding at a binade edge: [L x 2^j, U] vs [L x (2^j + 1)], gap 2^(j+m-k) = 2^j (U - L)"
            }
            AttackKind::RepeatedRounding1 => {
                "accumulated rounding after removing one leading U: staircase f(x) = (2^x + 2^(x-k)) 2^m, gap 2^(k+j+m)"
            }
            AttackKind::RepeatedRounding2 => {
                "alternating round-up/round-down pairs after m or m-1 copies of U: gap n^2 U / 2^(k+3) + U"
            }
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttackKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = AttackKind::ALL.iter().map(|k| k.name()).collect();
                Error::Parse(format!("theorem: unknown attack '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

/// An adjacent pair with its predicted gap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackInstance<T: Element> {
    pub kind: AttackKind,
    pub u: Dataset<T>,
    pub v: Dataset<T>,
    pub metric: Metric,
    pub adjacency_distance: u64,
    pub predicted_gap: DyadicRational,
    pub idealized: DyadicRational,
    pub blowup: BigRational,
    /// Method the construction targets.
    pub native: SumMethod,
    /// Free parameters of the construction, by name.
    pub params: Vec<(String, i64)>,
}

impl<T: Element> AttackInstance<T> {
    pub fn theorem(&self) -> &'static str {
        self.kind.citation()
    }
}

/// Closed-form description of an instance, available without building it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prediction {
    pub lower: DyadicRational,
    pub upper: DyadicRational,
    pub len_u: u64,
    pub len_v: u64,
    pub predicted_gap: DyadicRational,
    pub idealized: DyadicRational,
    pub blowup: BigRational,
}

/// Largest number of runs a generator will build.
pub const MAX_RUNS: u64 = 1 << 24;

fn ratio(a: &DyadicRational, b: &DyadicRational) -> BigRational {
    a.to_rational() / b.to_rational()
}

fn p2(e: i64) -> DyadicRational {
    DyadicRational::pow2(e)
}

fn int(v: i128) -> DyadicRational {
    DyadicRational::from_int(v)
}

fn float(fmt: FloatFormat, q: &DyadicRational, what: &str) -> Result<SimFloat> {
    SimFloat::exact(fmt, q)
        .map_err(|_| Error::Precondition(format!("{what} = {q} is not exactly representable in {fmt}")))
}

fn kint(fmt: IntFormat, v: i128, what: &str) -> Result<KInt> {
    KInt::new(fmt, v).map_err(|_| Error::Precondition(format!("{what} = {v} is outside the range of {fmt}")))
}

fn finish<T: Element>(
    kind: AttackKind,
    u: Dataset<T>,
    v: Dataset<T>,
    metric: Metric,
    expected_distance: u64,
    predicted_gap: DyadicRational,
    idealized: DyadicRational,
    native: SumMethod,
    params: &[(&str, i64)],
) -> Result<AttackInstance<T>> {
    let got = distance(metric, &u, &v)?;
    if got != Distance::Finite(expected_distance) {
        return Err(Error::Arithmetic(format!(
            "{kind} construction produced {metric} distance {got}, expected {expected_distance}"
        )));
    }
    Ok(AttackInstance {
        kind,
        blowup: ratio(&predicted_gap, &idealized),
        u,
        v,
        metric,
        adjacency_distance: expected_distance,
        predicted_gap,
        idealized,
        native,
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    })
}

fn int_gap(fmt: IntFormat) -> DyadicRational {
    int(fmt.max_value() - fmt.min_value())
}

fn overflow_parts(fmt: IntFormat, lower: i128, upper: i128) -> Result<(KInt, KInt, KInt, u64)> {
    if fmt.overflow() != Overflow::Wraparound {
        return pre(format!("format: overflow attack needs wraparound addition, got {fmt}"));
    }
    if lower != 0 {
        return pre(format!("lower: overflow attack needs L = 0, got {lower}"));
    }
    if upper < 1 {
        return pre(format!("upper: overflow attack needs U >= 1, got {upper}"));
    }
    let max = fmt.max_value();
    let c = (max + upper - 1) / upper;
    let n = c + 1;
    let m = max - (n - 2) * upper;
    Ok((
        kint(fmt, 0, "lower")?,
        kint(fmt, upper, "upper")?,
        kint(fmt, m, "M")?,
        n as u64,
    ))
}

/// `[U x (n-2), M]` vs `[U x (n-2), M, 1]`: the second sum wraps from `max` to `min`.
pub fn overflow_attack(fmt: IntFormat, lower: i128, upper: i128) -> Result<AttackInstance<KInt>> {
    let (lo, hi, m, n) = overflow_parts(fmt, lower, upper)?;
    let one = kint(fmt, 1, "one")?;
    let u = Dataset::from_runs(lo, hi, [(hi, n - 2), (m, 1)])?;
    let v = Dataset::from_runs(lo, hi, [(hi, n - 2), (m, 1), (one, 1)])?;
    finish(
        AttackKind::Overflow,
        u,
        v,
        Metric::Id,
        1,
        int_gap(fmt),
        int(upper),
        SumMethod::iterative(),
        &[("n", n as i64)],
    )
}

/// Equal-length variant: a 0 is appended to the first dataset.
pub fn overflow_attack_ham(fmt: IntFormat, lower: i128, upper: i128) -> Result<AttackInstance<KInt>> {
    let (lo, hi, m, n) = overflow_parts(fmt, lower, upper)?;
    let one = kint(fmt, 1, "one")?;
    let u = Dataset::from_runs(lo, hi, [(hi, n - 2), (m, 1), (lo, 1)])?;
    let v = Dataset::from_runs(lo, hi, [(hi, n - 2), (m, 1), (one, 1)])?;
    finish(
        AttackKind::OverflowHam,
        u,
        v,
        Metric::Ham,
        1,
        int_gap(fmt),
        int(upper - lower),
        SumMethod::iterative(),
        &[("n", n as i64)],
    )
}

/// `[L x b, U x c]` vs `[U x c, L x b]`: each order saturates at the opposite extreme.
pub fn saturation_reorder_attack(fmt: IntFormat, lower: i128, upper: i128) -> Result<AttackInstance<KInt>> {
    if fmt.overflow() != Overflow::Saturating || !fmt.signed() {
        return pre(format!("format: saturation attack needs signed saturating integers, got {fmt}"));
    }
    if lower >= 0 {
        return pre(format!("lower: saturation attack needs L < 0, got {lower}"));
    }
    if upper <= 0 {
        return pre(format!("upper: saturation attack needs U > 0, got {upper}"));
    }
    let lo = kint(fmt, lower, "lower")?;
    let hi = kint(fmt, upper, "upper")?;
    let span = fmt.max_value() - fmt.min_value();
    let b = (span + (-lower) - 1) / (-lower);
    let c = (span + upper - 1) / upper;
    let u = Dataset::from_runs(lo, hi, [(lo, b as u64), (hi, c as u64)])?;
    let v = Dataset::from_runs(lo, hi, [(hi, c as u64), (lo, b as u64)])?;
    finish(
        AttackKind::SaturationReorder,
        u,
        v,
        Metric::Sym,
        0,
        int_gap(fmt),
        int((-lower).max(upper)),
        SumMethod::iterative(),
        &[("b", b as i64), ("c", c as i64)],
    )
}

/// `L = 2^j`, `U = 2^(j+d)`: many small values first absorb into a large
/// partial sum only when they come second.
///
/// With `drop_last`, the last element of the reordered dataset is removed so
/// the pair is at distance 1 instead of 0.
pub fn float_reorder_attack(
    fmt: FloatFormat,
    j: i64,
    a: i64,
    d: i64,
    drop_last: bool,
) -> Result<AttackInstance<SimFloat>> {
    let k = fmt.mantissa_bits() as i64;
    let (emin, emax) = (fmt.emin() as i64, fmt.emax() as i64);
    if j < emin || j > emax - 2 - k {
        return pre(format!("j: need {emin} <= j <= {}, got {j}", emax - 2 - k));
    }
    if a < 0 {
        return pre(format!("a: need a >= 0, got {a}"));
    }
    if d <= 0 {
        return pre(format!("d: need d > 0, got {d}"));
    }
    if a + d > k + 1 {
        return pre(format!("a, d: need a + d <= k + 1 = {}, got {}", k + 1, a + d));
    }
    let lo = float(fmt, &p2(j), "L")?;
    let hi = float(fmt, &p2(j + d), "U")?;
    let b = 1u64 << (k + 1 - a);
    let c = 1u64 << (k + 1 - d);
    let u = Dataset::from_runs(lo, hi, [(lo, b), (hi, c)])?;
    let v = Dataset::from_runs(lo, hi, [(hi, c), (lo, b - drop_last as u64)])?;
    let mut inst = finish(
        AttackKind::FloatReorder,
        u,
        v,
        Metric::Sym,
        drop_last as u64,
        p2(k + 1 - a - d + j + d),
        p2(j + d),
        SumMethod::iterative(),
        &[("j", j), ("a", a), ("d", d), ("drop_last", drop_last as i64)],
    )?;
    inst.params.push(("n".into(), (b + c) as i64));
    Ok(inst)
}

/// `L = (1 + 2^(j-k-1)) 2^m`, `U = L + 2^(m-k)`: the `2^j` copies of `L`
/// round up once the partial sum crosses into the next binade.
pub fn rounding_attack(fmt: FloatFormat, j: i64, m: i64) -> Result<AttackInstance<SimFloat>> {
    let k = fmt.mantissa_bits() as i64;
    let (emin, emax) = (fmt.emin() as i64, fmt.emax() as i64);
    if j <= 1 || 2 * j >= k + 1 {
        return pre(format!("j: need 1 < j < (k+1)/2 = {}/2, got {j}", k + 1));
    }
    if m < emin || m > emax - j {
        return pre(format!("m: need {emin} <= m <= {}, got {m}", emax - j));
    }
    let lq = p2(m) + p2(m - k - 1 + j);
    let uq = &lq + &p2(m - k);
    let lo = float(fmt, &lq, "L")?;
    let hi = float(fmt, &uq, "U")?;
    let reps = 1u64 << j;
    let u = Dataset::from_runs(lo, hi, [(lo, reps), (hi, 1)])?;
    let v = Dataset::from_runs(lo, hi, [(lo, reps + 1)])?;
    let mut inst = finish(
        AttackKind::Rounding,
        u,
        v,
        Metric::Ham,
        1,
        p2(j + m - k),
        p2(m - k),
        SumMethod::iterative(),
        &[("j", j), ("m", m)],
    )?;
    inst.params.push(("n".into(), (reps + 1) as i64));
    Ok(inst)
}

/// `L = 0`, `U = 2^(k+m)`; `u = [U, U, f(0) x 2^k, ..., f(j-1) x 2^k]` with
/// `f(x) = (2^x + 2^(x-k)) 2^m`, and `v` drops the first element of `u`.
pub fn repeated_rounding_attack_1(fmt: FloatFormat, j: i64, m: i64) -> Result<AttackInstance<SimFloat>> {
    let k = fmt.mantissa_bits() as i64;
    let (emin, emax) = (fmt.emin() as i64, fmt.emax() as i64);
    if j <= 0 || j > k {
        return pre(format!("j: need 0 < j <= k = {k}, got {j}"));
    }
    if m < emin || m > emax - 1 - j - k {
        return pre(format!("m: need {emin} <= m <= {}, got {m}", emax - 1 - j - k));
    }
    let lo = fmt.zero();
    let hi = float(fmt, &p2(k + m), "U")?;
    let reps = 1u64 << k;
    let mut runs = vec![(hi, 2)];
    for x in 0..j {
        let fx = p2(x + m) + p2(x - k + m);
        runs.push((float(fmt, &fx, "f(x)")?, reps));
    }
    let u = Dataset::from_runs(lo, hi, runs.iter().copied())?;
    runs[0].1 = 1;
    let v = Dataset::from_runs(lo, hi, runs)?;
    finish(
        AttackKind::RepeatedRounding1,
        u,
        v,
        Metric::Id,
        1,
        p2(k + j + m),
        p2(k + m),
        SumMethod::iterative(),
        &[("j", j), ("m", m)],
    )
}

fn rr2_check(fmt: FloatFormat, j: i64, a: i64) -> Result<()> {
    let k = fmt.mantissa_bits() as i64;
    let (emin, emax) = (fmt.emin() as i64, fmt.emax() as i64);
    if j < 2 || j >= k {
        return pre(format!("j: need 2 <= j < k = {k}, got {j}"));
    }
    if a < emin {
        return pre(format!("a: need a >= {emin}, got {a}"));
    }
    if j + a < emin + 1 + k || j + a > emax {
        return pre(format!("j, a: need {} <= j + a <= {emax}, got {}", emin + 1 + k, j + a));
    }
    Ok(())
}

/// `(L, x)` of the second repeated-rounding construction: with `h = U m / 2^k`,
/// `L = -h (1/2 - 2^-k)` and `x = h (1/2 + 2^-k)`.
fn rr2_values(k: i64, j: i64, a: i64) -> (DyadicRational, DyadicRational) {
    let h = a + j - 1 - k;
    let l = -(p2(h - 1) - p2(h - k));
    let x = p2(h - 1) + p2(h - k);
    (l, x)
}

/// Parameters and gap of the second repeated-rounding construction, valid
/// even when the datasets are too large to build.
pub fn repeated_rounding_2_prediction(fmt: FloatFormat, j: i64, a: i64) -> Result<Prediction> {
    rr2_check(fmt, j, a)?;
    let k = fmt.mantissa_bits() as i64;
    let (l, _) = rr2_values(k, j, a);
    let n = 1u64 << j;
    let upper = p2(a);
    let gap = p2(2 * j - k - 3 + a) + upper.clone();
    Ok(Prediction {
        blowup: ratio(&gap, &upper),
        lower: l,
        idealized: upper.clone(),
        upper,
        len_u: n,
        len_v: n - 1,
        predicted_gap: gap,
    })
}

/// `n = 2^j`, `m = n/2`, `U = 2^a`; `u = [U x m, (x, L) x m/2]` and
/// `v = [U x (m-1), (x, L) x m/2]`. Each `(x, L)` pair adds one ulp after
/// `m U` and nothing after `(m-1) U`.
pub fn repeated_rounding_attack_2(fmt: FloatFormat, j: i64, a: i64) -> Result<AttackInstance<SimFloat>> {
    let p = repeated_rounding_2_prediction(fmt, j, a)?;
    let k = fmt.mantissa_bits() as i64;
    let m = 1u64 << (j - 1);
    if m + 1 > MAX_RUNS {
        return Err(Error::TooLarge(format!(
            "j: the alternating tail has {m} runs (limit {MAX_RUNS}); use the closed-form prediction"
        )));
    }
    let (lq, xq) = rr2_values(k, j, a);
    let lo = float(fmt, &lq, "L")?;
    let x = float(fmt, &xq, "x")?;
    let hi = float(fmt, &p.upper, "U")?;
    let tail = (0..m).map(|i| (if i % 2 == 0 { x } else { lo }, 1));
    let u = Dataset::from_runs(lo, hi, std::iter::once((hi, m)).chain(tail.clone()))?;
    let v = Dataset::from_runs(lo, hi, std::iter::once((hi, m - 1)).chain(tail))?;
    let mut inst = finish(
        AttackKind::RepeatedRounding2,
        u,
        v,
        Metric::Id,
        1,
        p.predicted_gap,
        p.idealized,
        SumMethod::iterative(),
        &[("j", j), ("a", a)],
    )?;
    inst.params.push(("n".into(), (2 * m) as i64));
    Ok(inst)
}

/// `|BS*(u) - BS*(v)|` for `method`, in exact arithmetic.
///
/// With a random permutation, `u` is shuffled by the method's seed and `v` is
/// ordered by the coupling (same order, one element inserted, removed or
/// changed), so the gap is the one the permuted mechanism pairs up.
pub fn verify_attack<T: SumElement>(inst: &AttackInstance<T>, method: &SumMethod) -> Result<DyadicRational> {
    let (u, v, m) = if method.permuted() {
        coupled_pair(inst, method)?
    } else {
        (inst.u.clone(), inst.v.clone(), method.clone())
    };
    let a = run_method_exact(&m, &u)?;
    let b = run_method_exact(&m, &v)?;
    Ok((a - b).abs())
}

fn coupled_pair<T: SumElement>(
    inst: &AttackInstance<T>,
    method: &SumMethod,
) -> Result<(Dataset<T>, Dataset<T>, SumMethod)> {
    let ts = &method.transforms;
    let pos = ts
        .iter()
        .position(|t| matches!(t, Transform::RandomPermutation { .. }))
        .expect("permuted method");
    let Transform::RandomPermutation { seed } = ts[pos] else { unreachable!() };
    let (mut u, mut v) = (inst.u.clone(), inst.v.clone());
    for t in &ts[..pos] {
        match *t {
            Transform::Truncate { n_max } => {
                u = truncate(&u, n_max);
                v = truncate(&v, n_max);
            }
            _ => {
                return Err(Error::Unsupported(format!(
                    "method: {t} before the random permutation cannot be coupled"
                )))
            }
        }
    }
    let pu = random_permutation(&u, seed)?.to_vec();
    let ev = v.to_vec();
    let pv = if inst.metric.known_n() {
        couple_co(&pu, &ev)?
    } else {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        couple_sym(&pu, &ev, &mut rng)?
    };
    let rest = SumMethod {
        transforms: ts[pos + 1..].to_vec(),
        ..method.clone()
    };
    Ok((u.with_elements(pu)?, v.with_elements(pv)?, rest))
}

/// Outcome of rerunning an instance under its native method.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verification {
    pub realized: DyadicRational,
    pub predicted: DyadicRational,
    pub holds: bool,
}

pub fn verify_native<T: SumElement>(inst: &AttackInstance<T>) -> Result<Verification> {
    let realized = verify_attack(inst, &inst.native)?;
    Ok(Verification {
        holds: realized >= inst.predicted_gap,
        predicted: inst.predicted_gap.clone(),
        realized,
    })
}

/// An instance over either element type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnyAttack {
    Float(AttackInstance<SimFloat>),
    Int(AttackInstance<KInt>),
}

impl AnyAttack {
    pub fn kind(&self) -> AttackKind {
        match self {
            AnyAttack::Float(i) => i.kind,
            AnyAttack::Int(i) => i.kind,
        }
    }

    pub fn verify(&self, method: &SumMethod) -> Result<DyadicRational> {
        match self {
            AnyAttack::Float(i) => verify_attack(i, method),
            AnyAttack::Int(i) => verify_attack(i, method),
        }
    }
}

/// Small instances of every float construction for one format, for use as
/// extra candidates in lower-bound searches.
pub fn float_instances(fmt: FloatFormat, max_len: u64) -> Vec<AttackInstance<SimFloat>> {
    let k = fmt.mantissa_bits() as i64;
    let (emin, emax) = (fmt.emin() as i64, fmt.emax() as i64);
    let mut out = Vec::new();
    let mut keep = |r: Result<AttackInstance<SimFloat>>| {
        if let Ok(i) = r {
            if i.u.len().max(i.v.len()) <= max_len {
                out.push(i);
            }
        }
    };
    for j in emin..=emax {
        for a in 0..=k + 1 {
            for d in 1..=k + 1 - a {
                if (1u64 << (k + 1 - a)) + (1u64 << (k + 1 - d)) <= max_len {
                    keep(float_reorder_attack(fmt, j, a, d, false));
                    keep(float_reorder_attack(fmt, j, a, d, true));
                }
            }
        }
        for jj in 2..=k {
            if (1u64 << jj) < max_len {
                keep(rounding_attack(fmt, jj, j));
                keep(repeated_rounding_attack_2(fmt, jj, j));
            }
        }
    }
    out
}

/// Overflow and saturation instances for one integer format.
pub fn int_instances(fmt: IntFormat, max_len: u64) -> Vec<AttackInstance<KInt>> {
    let mut out = Vec::new();
    let hi = fmt.max_value().min(1 << 12);
    for upper in 1..=hi {
        for inst in [
            overflow_attack(fmt, 0, upper),
            overflow_attack_ham(fmt, 0, upper),
            saturation_reorder_attack(fmt, -upper, upper),
        ]
        .into_iter()
        .flatten()
        {
            if inst.u.len().max(inst.v.len()) <= max_len {
                out.push(inst);
            }
        }
    }
    out
}
