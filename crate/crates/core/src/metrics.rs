//! Datasets, histograms, and the four adjacency metrics.
//!
//! Datasets are stored run-length encoded so that instances with tens of
//! millions of repeated elements stay small. Distances walk runs where they
//! can and only expand the part of two datasets that actually differs.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{pre, Error, Result};
use crate::numeric::{DyadicRational, Element};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Sym,
    Co,
    Ham,
    Id,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Sym, Metric::Co, Metric::Ham, Metric::Id];

    /// Ordered metrics see element positions; unordered ones see histograms.
    pub fn is_ordered(self) -> bool {
        matches!(self, Metric::Ham | Metric::Id)
    }

    /// Change-one and Hamming only compare datasets of one public length.
    pub fn known_n(self) -> bool {
        matches!(self, Metric::Co | Metric::Ham)
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Sym => "sym",
            Metric::Co => "co",
            Metric::Ham => "ham",
            Metric::Id => "id",
        }
    }

    /// The ordered metric that random permutation couples this one to.
    pub fn ordered_counterpart(self) -> Metric {
        match self {
            Metric::Sym | Metric::Id => Metric::Id,
            Metric::Co | Metric::Ham => Metric::Ham,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sym" => Ok(Metric::Sym),
            "co" => Ok(Metric::Co),
            "ham" => Ok(Metric::Ham),
            "id" => Ok(Metric::Id),
            _ => Err(Error::Parse(format!("unknown metric {s:?}"))),
        }
    }
}

/// A distance value; datasets of different length are infinitely far apart
/// under the change-one and Hamming metrics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Distance {
    Finite(u64),
    Infinite,
}

impl Distance {
    pub fn is_adjacent(self) -> bool {
        self <= Distance::Finite(1)
    }

    pub fn finite(self) -> Option<u64> {
        match self {
            Distance::Finite(d) => Some(d),
            Distance::Infinite => None,
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Finite(d) => write!(f, "{d}"),
            Distance::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Run<T> {
    pub value: T,
    pub count: u64,
}

/// Ordered elements within bounds `[L, U]`, run-length encoded.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dataset<T: Element> {
    runs: Vec<Run<T>>,
    lower: T,
    upper: T,
    len: u64,
}

pub type Histogram<T> = BTreeMap<T, u64>;

impl<T: Element> Dataset<T> {
    pub fn empty(lower: T, upper: T) -> Result<Self> {
        if lower.format() != upper.format() {
            return pre("bounds have different formats");
        }
        if !lower.to_exact()?.le(&upper.to_exact()?) {
            return pre(format!("lower bound {lower:?} exceeds upper bound {upper:?}"));
        }
        Ok(Dataset {
            runs: Vec::new(),
            lower,
            upper,
            len: 0,
        })
    }

    pub fn new(lower: T, upper: T, elements: impl IntoIterator<Item = T>) -> Result<Self> {
        let mut ds = Self::empty(lower, upper)?;
        for e in elements {
            ds.push_run(e, 1)?;
        }
        Ok(ds)
    }

    pub fn from_runs(lower: T, upper: T, runs: impl IntoIterator<Item = (T, u64)>) -> Result<Self> {
        let mut ds = Self::empty(lower, upper)?;
        for (v, c) in runs {
            ds.push_run(v, c)?;
        }
        Ok(ds)
    }

    /// Appends `count` copies of `value`, checking bounds and format.
    pub fn push_run(&mut self, value: T, count: u64) -> Result<()> {
        if value.format() != self.lower.format() {
            return pre(format!("element {value:?} has the wrong format"));
        }
        let x = value.to_exact()?;
        if x < self.lower.to_exact()? || x > self.upper.to_exact()? {
            return pre(format!("element {value:?} lies outside [L, U]"));
        }
        if count == 0 {
            return Ok(());
        }
        self.len += count;
        match self.runs.last_mut() {
            Some(r) if r.value == value => r.count += count,
            _ => self.runs.push(Run { value, count }),
        }
        Ok(())
    }

    pub fn push(&mut self, value: T) -> Result<()> {
        self.push_run(value, 1)
    }

    /// Same bounds, different elements.
    pub fn with_elements(&self, elements: impl IntoIterator<Item = T>) -> Result<Self> {
        Self::new(self.lower, self.upper, elements)
    }

    pub fn runs(&self) -> &[Run<T>] {
        &self.runs
    }

    pub fn lower(&self) -> T {
        self.lower
    }

    pub fn upper(&self) -> T {
        self.upper
    }

    pub fn format(&self) -> T::Format {
        self.lower.format()
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = T> + '_ {
        self.runs
            .iter()
            .flat_map(|r| std::iter::repeat_n(r.value, r.count as usize))
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.iter().collect()
    }

    /// The first `n` elements.
    pub fn prefix(&self, n: u64) -> Self {
        let mut out = Self {
            runs: Vec::new(),
            lower: self.lower,
            upper: self.upper,
            len: 0,
        };
        let mut left = n;
        for r in &self.runs {
            if left == 0 {
                break;
            }
            let c = r.count.min(left);
            out.runs.push(Run { value: r.value, count: c });
            out.len += c;
            left -= c;
        }
        out
    }

    /// The dataset without its first element.
    pub fn drop_first(&self) -> Self {
        let mut out = self.clone();
        if let Some(first) = out.runs.first_mut() {
            first.count -= 1;
            out.len -= 1;
            if first.count == 0 {
                out.runs.remove(0);
            }
        }
        out
    }

    pub fn histogram(&self) -> Histogram<T> {
        let mut h = Histogram::new();
        for r in &self.runs {
            *h.entry(r.value).or_insert(0) += r.count;
        }
        h
    }

    /// Exact element values summed over the reals.
    pub fn exact_sum(&self) -> Result<DyadicRational> {
        let mut acc = DyadicRational::zero();
        for r in &self.runs {
            let v = r.value.to_exact()?;
            acc = acc + v * DyadicRational::from_int(r.count as i128);
        }
        Ok(acc)
    }
}

/// Histogram of a plain slice.
pub fn histogram<T: Element>(v: &[T]) -> Histogram<T> {
    let mut h = Histogram::new();
    for x in v {
        *h.entry(*x).or_insert(0) += 1;
    }
    h
}

fn hist_diff<T: Element>(a: &Histogram<T>, b: &Histogram<T>) -> (u64, u64) {
    // (Σ max(a-b,0), Σ max(b-a,0))
    let mut plus = 0;
    let mut minus = 0;
    for (z, &ca) in a {
        let cb = b.get(z).copied().unwrap_or(0);
        plus += ca.saturating_sub(cb);
    }
    for (z, &cb) in b {
        let ca = a.get(z).copied().unwrap_or(0);
        minus += cb.saturating_sub(ca);
    }
    (plus, minus)
}

pub fn d_sym<T: Element>(u: &Dataset<T>, v: &Dataset<T>) -> Distance {
    let (p, m) = hist_diff(&u.histogram(), &v.histogram());
    Distance::Finite(p + m)
}

pub fn d_co<T: Element>(u: &Dataset<T>, v: &Dataset<T>) -> Distance {
    if u.len() != v.len() {
        return Distance::Infinite;
    }
    Distance::Finite(hist_diff(&u.histogram(), &v.histogram()).0)
}

pub fn d_ham<T: Element>(u: &Dataset<T>, v: &Dataset<T>) -> Distance {
    if u.len() != v.len() {
        return Distance::Infinite;
    }
    Distance::Finite(ham_runs(&u.runs, &v.runs))
}

fn ham_runs<T: Element>(a: &[Run<T>], b: &[Run<T>]) -> u64 {
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a.first().map_or(0, |r| r.count), b.first().map_or(0, |r| r.count));
    let mut diff = 0;
    while i < a.len() && j < b.len() {
        let step = ra.min(rb);
        if a[i].value != b[j].value {
            diff += step;
        }
        ra -= step;
        rb -= step;
        if ra == 0 {
            i += 1;
            ra = a.get(i).map_or(0, |r| r.count);
        }
        if rb == 0 {
            j += 1;
            rb = b.get(j).map_or(0, |r| r.count);
        }
    }
    diff
}

/// Largest LCS table (cells) `d_id` will fill after trimming common ends.
pub const LCS_CELL_LIMIT: u128 = 400_000_000;

/// Insert-delete distance `len(u) + len(v) - 2·LCS(u, v)`.
///
/// Fails only when the trimmed middle sections are too large for the LCS table.
pub fn d_id<T: Element>(u: &Dataset<T>, v: &Dataset<T>) -> Result<Distance> {
    let (a, b) = trim_common_ends(&u.runs, &v.runs);
    let (na, nb) = (total(&a), total(&b));
    if na == 0 || nb == 0 {
        return Ok(Distance::Finite(na + nb));
    }
    if (na as u128) * (nb as u128) > LCS_CELL_LIMIT {
        return Err(Error::TooLarge(format!(
            "insert-delete distance on differing sections of {na} and {nb} elements"
        )));
    }
    let ea: Vec<T> = expand(&a);
    let eb: Vec<T> = expand(&b);
    Ok(Distance::Finite(na + nb - 2 * lcs_len(&ea, &eb) as u64))
}

fn total<T>(r: &[Run<T>]) -> u64 {
    r.iter().map(|x| x.count).sum()
}

fn expand<T: Copy>(r: &[Run<T>]) -> Vec<T> {
    r.iter()
        .flat_map(|x| std::iter::repeat_n(x.value, x.count as usize))
        .collect()
}

/// Strips the longest common prefix and suffix, working run by run.
fn trim_common_ends<T: Element>(a: &[Run<T>], b: &[Run<T>]) -> (Vec<Run<T>>, Vec<Run<T>>) {
    fn strip_front<T: Element>(a: &mut std::collections::VecDeque<Run<T>>, b: &mut std::collections::VecDeque<Run<T>>, back: bool) {
        loop {
            let (x, y) = if back {
                (a.back_mut(), b.back_mut())
            } else {
                (a.front_mut(), b.front_mut())
            };
            let (Some(x), Some(y)) = (x, y) else { return };
            if x.value != y.value {
                return;
            }
            let c = x.count.min(y.count);
            x.count -= c;
            y.count -= c;
            let (xe, ye) = (x.count == 0, y.count == 0);
            if back {
                if xe {
                    a.pop_back();
                }
                if ye {
                    b.pop_back();
                }
            } else {
                if xe {
                    a.pop_front();
                }
                if ye {
                    b.pop_front();
                }
            }
        }
    }
    let mut x: std::collections::VecDeque<Run<T>> = a.iter().copied().collect();
    let mut y: std::collections::VecDeque<Run<T>> = b.iter().copied().collect();
    strip_front(&mut x, &mut y, false);
    strip_front(&mut x, &mut y, true);
    (x.into_iter().collect(), y.into_iter().collect())
}

fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0u32; b.len() + 1];
    let mut cur = vec![0u32; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()] as usize
}

/// Distance under `metric`.
pub fn distance<T: Element>(metric: Metric, u: &Dataset<T>, v: &Dataset<T>) -> Result<Distance> {
    Ok(match metric {
        Metric::Sym => d_sym(u, v),
        Metric::Co => d_co(u, v),
        Metric::Ham => d_ham(u, v),
        Metric::Id => d_id(u, v)?,
    })
}

/// Distance between plain slices (small inputs).
pub fn distance_slices<T: Element>(metric: Metric, u: &[T], v: &[T]) -> Distance {
    match metric {
        Metric::Sym => {
            let (p, m) = hist_diff(&histogram(u), &histogram(v));
            Distance::Finite(p + m)
        }
        Metric::Co => {
            if u.len() != v.len() {
                Distance::Infinite
            } else {
                Distance::Finite(hist_diff(&histogram(u), &histogram(v)).0)
            }
        }
        Metric::Ham => {
            if u.len() != v.len() {
                Distance::Infinite
            } else {
                Distance::Finite(u.iter().zip(v).filter(|(a, b)| a != b).count() as u64)
            }
        }
        Metric::Id => Distance::Finite((u.len() + v.len() - 2 * lcs_len(u, v)) as u64),
    }
}

/// A path `u = p[0], …, p[d] = v` whose consecutive entries are adjacent.
/// `None` when the distance is infinite.
pub fn path<T: Element>(metric: Metric, u: &[T], v: &[T]) -> Option<Vec<Vec<T>>> {
    match metric {
        Metric::Ham => {
            if u.len() != v.len() {
                return None;
            }
            let mut out = vec![u.to_vec()];
            let mut cur = u.to_vec();
            for i in 0..u.len() {
                if cur[i] != v[i] {
                    cur[i] = v[i];
                    out.push(cur.clone());
                }
            }
            Some(out)
        }
        Metric::Id => Some(id_path(u, v)),
        Metric::Sym | Metric::Co => {
            if metric == Metric::Co && u.len() != v.len() {
                return None;
            }
            let hu = histogram(u);
            let hv = histogram(v);
            let mut excess: Vec<T> = Vec::new();
            let mut missing: Vec<T> = Vec::new();
            for (z, &c) in &hu {
                excess.extend(std::iter::repeat_n(*z, c.saturating_sub(hv.get(z).copied().unwrap_or(0)) as usize));
            }
            for (z, &c) in &hv {
                missing.extend(std::iter::repeat_n(*z, c.saturating_sub(hu.get(z).copied().unwrap_or(0)) as usize));
            }
            // Histogram steps; orderings of intermediate points are free for
            // unordered metrics, so only the endpoints keep their order.
            let mut hists = vec![hu.clone()];
            let mut h = hu;
            let dec = |h: &mut Histogram<T>, z: T| {
                let e = h.get_mut(&z).unwrap();
                *e -= 1;
                if *e == 0 {
                    h.remove(&z);
                }
            };
            if metric == Metric::Co {
                for (a, b) in excess.iter().zip(&missing) {
                    dec(&mut h, *a);
                    *h.entry(*b).or_insert(0) += 1;
                    hists.push(h.clone());
                }
            } else {
                for a in &excess {
                    dec(&mut h, *a);
                    hists.push(h.clone());
                }
                for b in &missing {
                    *h.entry(*b).or_insert(0) += 1;
                    hists.push(h.clone());
                }
            }
            let last = hists.len() - 1;
            Some(
                hists
                    .into_iter()
                    .enumerate()
                    .map(|(i, h)| {
                        if i == 0 {
                            u.to_vec()
                        } else if i == last {
                            v.to_vec()
                        } else {
                            h.into_iter()
                                .flat_map(|(z, c)| std::iter::repeat_n(z, c as usize))
                                .collect()
                        }
                    })
                    .collect(),
            )
        }
    }
}

fn id_path<T: Element>(u: &[T], v: &[T]) -> Vec<Vec<T>> {
    // Full LCS table, then mark which positions of u and v are kept.
    let (n, m) = (u.len(), v.len());
    let mut t = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            t[i][j] = if u[i] == v[j] {
                t[i + 1][j + 1] + 1
            } else {
                t[i + 1][j].max(t[i][j + 1])
            };
        }
    }
    let mut keep_u = vec![false; n];
    let mut keep_v = vec![false; m];
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if u[i] == v[j] {
            keep_u[i] = true;
            keep_v[j] = true;
            i += 1;
            j += 1;
        } else if t[i + 1][j] >= t[i][j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    let mut out = vec![u.to_vec()];
    // Delete unkept elements of u from the back so indices stay valid.
    let mut cur = u.to_vec();
    for idx in (0..n).rev() {
        if !keep_u[idx] {
            cur.remove(idx);
            out.push(cur.clone());
        }
    }
    // `cur` is now the common subsequence; insert v's extras left to right.
    let mut pos = 0;
    for (j, z) in v.iter().enumerate() {
        if !keep_v[j] {
            cur.insert(pos, *z);
            out.push(cur.clone());
        }
        pos += 1;
    }
    out
}

/// Couples an ordering `pu` of `u` with an ordering of `u2`, where
/// `d_sym(u, u2) <= 1`, so that the two orderings are insert-delete adjacent.
/// A uniformly random `pu` and a uniform insertion point give a uniformly
/// random ordering of `u2`.
pub fn couple_sym<T: Element, R: Rng + ?Sized>(pu: &[T], u2: &[T], rng: &mut R) -> Result<Vec<T>> {
    let (extra_u, extra_u2) = single_difference(pu, u2)?;
    match (extra_u, extra_u2) {
        (None, None) => Ok(pu.to_vec()),
        (None, Some(z)) => {
            let mut out = pu.to_vec();
            let at = rng.random_range(0..=out.len());
            out.insert(at, z);
            Ok(out)
        }
        (Some(z), None) => {
            let mut out = pu.to_vec();
            let at = out.iter().position(|x| *x == z).expect("element present");
            out.remove(at);
            Ok(out)
        }
        (Some(_), Some(_)) => pre("datasets are not symmetric-distance adjacent"),
    }
}

/// Couples an ordering `pu` of `u` with an ordering of `u2`, where
/// `d_co(u, u2) <= 1`, so that the two orderings are Hamming adjacent.
pub fn couple_co<T: Element>(pu: &[T], u2: &[T]) -> Result<Vec<T>> {
    if pu.len() != u2.len() {
        return pre("change-one coupling needs equal lengths");
    }
    match single_difference(pu, u2)? {
        (None, None) => Ok(pu.to_vec()),
        (Some(a), Some(b)) => {
            let mut out = pu.to_vec();
            let at = out.iter().position(|x| *x == a).expect("element present");
            out[at] = b;
            Ok(out)
        }
        _ => unreachable!("equal lengths"),
    }
}

/// The lone element in excess on each side, or an error when the histograms
/// differ by more than one element per side.
fn single_difference<T: Element>(a: &[T], b: &[T]) -> Result<(Option<T>, Option<T>)> {
    let ha = histogram(a);
    let hb = histogram(b);
    let mut ea = Vec::new();
    let mut eb = Vec::new();
    for (z, &c) in &ha {
        for _ in 0..c.saturating_sub(hb.get(z).copied().unwrap_or(0)) {
            ea.push(*z);
        }
    }
    for (z, &c) in &hb {
        for _ in 0..c.saturating_sub(ha.get(z).copied().unwrap_or(0)) {
            eb.push(*z);
        }
    }
    if ea.len() > 1 || eb.len() > 1 {
        return pre("datasets differ in more than one element");
    }
    Ok((ea.first().copied(), eb.first().copied()))
}
