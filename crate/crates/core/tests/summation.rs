use boundsum::metrics::{distance_slices, histogram, Dataset, Metric};
use boundsum::numeric::{is_representable, round, Element};
use boundsum::summation::{
    bs_exact, bs_iterative, bs_kahan, bs_pairwise, bs_split, check_multiplication,
    float_overflow_check, kahan, pairwise, random_permutation, run_method, shift_bounds, shuffle,
    truncate, Algorithm, SumMethod, Transform,
};
use boundsum::{DyadicRational, FloatArith, FloatFormat, IntFormat, KInt, Overflow, Rounding, SimFloat};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const B: Rounding = Rounding::Banker;

fn d(s: &str) -> DyadicRational {
    s.parse().unwrap()
}

fn f34() -> FloatFormat {
    FloatFormat::new(3, 4).unwrap()
}

fn fl(fmt: FloatFormat, s: &str) -> SimFloat {
    SimFloat::exact(fmt, &d(s)).unwrap()
}

fn fds(fmt: FloatFormat, xs: &[SimFloat]) -> Dataset<SimFloat> {
    Dataset::new(fmt.min_finite(), fmt.max_finite(), xs.iter().copied()).unwrap()
}

fn ids(fmt: IntFormat, xs: &[i128]) -> Dataset<KInt> {
    let lo = KInt::new(fmt, fmt.min_value()).unwrap();
    let hi = KInt::new(fmt, fmt.max_value()).unwrap();
    Dataset::new(lo, hi, xs.iter().map(|&x| KInt::new(fmt, x).unwrap())).unwrap()
}

// Direct transcriptions of the textbook loops, one element at a time.
fn naive_iterative(xs: &[SimFloat], mode: Rounding) -> SimFloat {
    let mut s = SimFloat::zero(xs[0].format());
    for x in xs {
        s = s.add(x, mode).unwrap();
    }
    s
}

fn naive_pairwise(xs: &[SimFloat], mode: Rounding) -> SimFloat {
    match xs.len() {
        0 => unreachable!(),
        1 => xs[0],
        n => {
            let m = n / 2;
            naive_pairwise(&xs[..m], mode)
                .add(&naive_pairwise(&xs[m..], mode), mode)
                .unwrap()
        }
    }
}

fn naive_kahan(xs: &[SimFloat], mode: Rounding) -> SimFloat {
    let z = SimFloat::zero(xs[0].format());
    let (mut sum, mut c) = (z, z);
    for x in xs {
        let y = x.sub(&c, mode).unwrap();
        let t = sum.add(&y, mode).unwrap();
        c = t.sub(&sum, mode).unwrap().sub(&y, mode).unwrap();
        sum = t;
    }
    sum
}

#[test]
fn frozen_examples() {
    let f = f34();
    let v = fds(f, &[fl(f, "16"), fl(f, "1.125")]);
    assert_eq!(bs_iterative(&v, B).unwrap().to_exact().unwrap(), d("18"));
    assert_eq!(bs_exact(&v).unwrap(), d("17.125"));
    assert_eq!(bs_exact(&fds(f, &[])).unwrap(), d("0"));
    assert_eq!(bs_exact(&fds(f, &[fl(f, "1"), fl(f, "1.125")])).unwrap(), d("2.125"));

    let u4 = IntFormat::new(4, false, Overflow::Wraparound).unwrap();
    assert_eq!(bs_iterative(&ids(u4, &[15, 1]), B).unwrap().value(), 0);

    let xs = [fl(f, "0.875"), fl(f, "13"), fl(f, "0.3125"), fl(f, "6")];
    let want = xs[0]
        .add(&xs[1], B)
        .unwrap()
        .add(&xs[2].add(&xs[3], B).unwrap(), B)
        .unwrap();
    assert_eq!(bs_pairwise(&fds(f, &xs), B).unwrap(), want);
    assert_eq!(bs_pairwise(&fds(f, &xs[..1]), B).unwrap(), xs[0]);
    assert_eq!(bs_kahan(&fds(f, &xs[..1]), B).unwrap(), xs[0]);
}

#[test]
fn iterative_sum_depends_on_order_at_n3() {
    // Two orderings of one multiset whose rounded sums differ.
    let f = f34();
    let vals = f.enumerate_finite();
    let mut found = None;
    'outer: for a in &vals {
        for b in &vals {
            for c in &vals {
                let u = [*a, *b, *c];
                let v = [*c, *b, *a];
                if naive_iterative(&u, B) != naive_iterative(&v, B) {
                    found = Some((u, v));
                    break 'outer;
                }
            }
        }
    }
    let (u, v) = found.expect("witness");
    assert_eq!(histogram(&u), histogram(&v));
    assert_ne!(
        bs_iterative(&fds(f, &u), B).unwrap(),
        bs_iterative(&fds(f, &v), B).unwrap()
    );
}

fn all_exact(xs: &[DyadicRational], f: FloatFormat) -> bool {
    xs.iter().all(|q| is_representable(q, f))
}

fn pairwise_nodes(xs: &[DyadicRational], out: &mut Vec<DyadicRational>) -> DyadicRational {
    if xs.len() == 1 {
        return xs[0].clone();
    }
    let m = xs.len() / 2;
    let s = pairwise_nodes(&xs[..m], out) + pairwise_nodes(&xs[m..], out);
    out.push(s.clone());
    s
}

#[test]
fn algorithms_are_exact_when_intermediates_are_representable() {
    // Exhaustive at (3,4) over n <= 3, and n = 4 on a strided subset.
    let f = f34();
    let vals = f.enumerate_finite();
    let sub: Vec<_> = vals.iter().copied().step_by(7).collect();
    let mut sets: Vec<Vec<SimFloat>> = Vec::new();
    for a in &vals {
        sets.push(vec![*a]);
        for b in &vals {
            sets.push(vec![*a, *b]);
        }
    }
    for a in &sub {
        for b in &sub {
            for c in &sub {
                sets.push(vec![*a, *b, *c]);
                for e in &sub {
                    sets.push(vec![*a, *b, *c, *e]);
                }
            }
        }
    }
    let (mut it_checked, mut pw_checked, mut split_checked) = (0, 0, 0);
    for xs in &sets {
        let q: Vec<_> = xs.iter().map(|x| x.to_exact().unwrap()).collect();
        let exact: DyadicRational = q.iter().cloned().sum();
        let ds = fds(f, xs);
        let prefixes: Vec<_> = (1..=q.len()).map(|i| q[..i].iter().cloned().sum()).collect();
        if all_exact(&prefixes, f) {
            it_checked += 1;
            for mode in [B, Rounding::TowardZero] {
                assert_eq!(bs_iterative(&ds, mode).unwrap().to_exact().unwrap(), exact);
                assert_eq!(bs_kahan(&ds, mode).unwrap().to_exact().unwrap(), exact);
            }
        }
        let mut nodes = Vec::new();
        pairwise_nodes(&q, &mut nodes);
        if all_exact(&nodes, f) {
            pw_checked += 1;
            assert_eq!(bs_pairwise(&ds, B).unwrap().to_exact().unwrap(), exact);
        }
        let (mut p, mut n) = (Vec::new(), Vec::new());
        let (mut ps, mut ns) = (DyadicRational::zero(), DyadicRational::zero());
        for x in &q {
            if x.is_negative() {
                ns = ns + x.clone();
                n.push(ns.clone());
            } else {
                ps = ps + x.clone();
                p.push(ps.clone());
            }
        }
        if all_exact(&p, f) && all_exact(&n, f) && is_representable(&exact, f) {
            split_checked += 1;
            assert_eq!(bs_split(&ds).unwrap().to_exact().unwrap(), exact, "{xs:?}");
        }
    }
    assert!(it_checked > 1000 && pw_checked > 1000 && split_checked > 1000);
}

#[test]
fn wraparound_iterative_is_order_invariant_exhaustively() {
    for signed in [false, true] {
        let f = IntFormat::new(4, signed, Overflow::Wraparound).unwrap();
        let vals: Vec<i128> = f.enumerate().map(|x| x.value()).collect();
        for a in &vals {
            for b in &vals {
                for c in &vals {
                    let s = bs_iterative(&ids(f, &[*a, *b, *c]), B).unwrap();
                    for p in [[*a, *c, *b], [*b, *a, *c], [*b, *c, *a], [*c, *a, *b], [*c, *b, *a]] {
                        assert_eq!(bs_iterative(&ids(f, &p), B).unwrap(), s);
                    }
                }
            }
        }
    }
}

#[test]
fn split_sum_neutralizes_saturation_reorder() {
    let f = IntFormat::new(4, true, Overflow::Saturating).unwrap();
    let u = ids(f, &[-4, -4, -4, -4, 3, 3, 3, 3, 3]);
    let v = ids(f, &[3, 3, 3, 3, 3, -4, -4, -4, -4]);
    assert_ne!(bs_iterative(&u, B).unwrap(), bs_iterative(&v, B).unwrap());
    assert_eq!(bs_split(&u).unwrap(), bs_split(&v).unwrap());
}

#[test]
fn split_float_matches_exact_on_mixed_signs() {
    let f = f34();
    let xs = [fl(f, "3"), fl(f, "-1.5"), fl(f, "2"), fl(f, "-0.25")];
    assert_eq!(bs_split(&fds(f, &xs)).unwrap().to_exact().unwrap(), d("3.25"));
    // Non-negative only: identical to iterative with round toward zero.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pos: Vec<_> = f.enumerate_finite().into_iter().filter(|x| !x.is_negative()).collect();
    for _ in 0..2000 {
        let n = rng.random_range(0..8);
        let xs: Vec<_> = (0..n).map(|_| pos[rng.random_range(0..pos.len())]).collect();
        let ds = fds(f, &xs);
        let split = run_method(&SumMethod::new(Algorithm::SplitFloatRtz, B), &ds).unwrap();
        if split.clamped {
            continue;
        }
        assert_eq!(split.value, bs_iterative(&ds, Rounding::TowardZero).unwrap());
    }
}

#[test]
fn split_float_clamps_infinite_partials() {
    let f = f34();
    let max = f.max_finite();
    let ds = fds(f, &[max, max, fl(f, "-1")]);
    let out = run_method(&SumMethod::new(Algorithm::SplitFloatRtz, B), &ds).unwrap();
    assert!(out.clamped);
    assert!(out.value.is_finite());
}

#[test]
fn random_permutation_is_uniform_on_three_elements() {
    let f = IntFormat::new(8, false, Overflow::Wraparound).unwrap();
    let ds = ids(f, &[1, 2, 3]);
    let mut counts = std::collections::HashMap::new();
    let trials = 60_000;
    for seed in 0..trials {
        let p = random_permutation(&ds, seed).unwrap();
        assert_eq!(p.histogram(), ds.histogram());
        *counts.entry(p.to_vec()).or_insert(0u64) += 1;
    }
    assert_eq!(counts.len(), 6);
    let expect = trials as f64 / 6.0;
    let sigma = (trials as f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
    let mut chi2 = 0.0;
    for c in counts.values() {
        assert!((*c as f64 - expect).abs() <= 3.0 * sigma, "{counts:?}");
        chi2 += (*c as f64 - expect).powi(2) / expect;
    }
    // 99.9th percentile of chi-square with 5 degrees of freedom.
    assert!(chi2 < 20.52, "chi2 = {chi2}");
    assert_eq!(random_permutation(&ds, 7).unwrap(), random_permutation(&ds, 7).unwrap());
    let one = ids(f, &[5]);
    assert_eq!(random_permutation(&one, 3).unwrap(), one);
}

#[test]
fn truncation_keeps_neighbours_within_one_swap() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let f = IntFormat::new(8, true, Overflow::Saturating).unwrap();
    for _ in 0..3000 {
        let n = rng.random_range(0..10);
        let u: Vec<i128> = (0..n).map(|_| rng.random_range(-3..4)).collect();
        let mut v = u.clone();
        if rng.random_bool(0.5) || v.is_empty() {
            v.insert(rng.random_range(0..=v.len()), rng.random_range(-3..4));
        } else {
            v.remove(rng.random_range(0..v.len()));
        }
        let n_max = rng.random_range(1..8);
        let tu = truncate(&ids(f, &u), n_max).to_vec();
        let tv = truncate(&ids(f, &v), n_max).to_vec();
        // An insertion inside the window pushes another element out, so the
        // truncations differ by one insertion plus one deletion at most.
        let id = distance_slices(Metric::Id, &tu, &tv).finite().unwrap();
        assert!(id <= 2);
        if tu.len() == tv.len() {
            assert!(distance_slices(Metric::Co, &tu, &tv).is_adjacent());
        } else {
            assert!(id <= 1);
        }
    }
    // The stronger "still insert/delete adjacent" statement does not hold.
    let (u, v) = (ids(f, &[1, 2]), ids(f, &[3, 1, 2]));
    let (tu, tv) = (truncate(&u, 2).to_vec(), truncate(&v, 2).to_vec());
    assert!(distance_slices(Metric::Id, &u.to_vec(), &v.to_vec()).is_adjacent());
    assert_eq!(distance_slices(Metric::Id, &tu, &tv).finite(), Some(2));
    let abc = ids(f, &[1, 2, 3]);
    assert_eq!(truncate(&abc, 2).to_vec(), ids(f, &[1, 2]).to_vec());
    assert_eq!(truncate(&abc, 5), abc);
}

#[test]
fn shift_bounds_examples() {
    let f = IntFormat::new(4, true, Overflow::Saturating).unwrap();
    let k = |x| KInt::new(f, x).unwrap();
    let v = Dataset::new(k(2), k(5), [k(2), k(5)]).unwrap();
    let m = SumMethod::iterative().with(Transform::ShiftBounds);
    let out = run_method(&m, &v).unwrap();
    assert_eq!(out.value.value(), 3);
    assert_eq!(out.offset, Some((k(2), 2)));
    let z = Dataset::new(k(0), k(5), [k(1), k(4)]).unwrap();
    assert_eq!(shift_bounds(&z).unwrap().0, z);
    // U - L = 14 does not fit a signed 4-bit integer.
    let wide = Dataset::new(k(-7), k(7), [k(0)]).unwrap();
    assert!(shift_bounds(&wide).is_err());
    // Float shift needs exact differences.
    let ff = f34();
    let fv = Dataset::new(fl(ff, "1"), fl(ff, "240"), [fl(ff, "1.125")]).unwrap();
    assert!(shift_bounds(&fv).is_err());
}

#[test]
fn checked_multiplication_examples() {
    let u8w = IntFormat::new(8, false, Overflow::Saturating).unwrap();
    assert!(check_multiplication(0, 16, 15, u8w));
    assert!(!check_multiplication(0, 16, 16, u8w));
    assert!(check_multiplication(0, 0, u64::MAX, u8w));
    let s8 = IntFormat::new(8, true, Overflow::Saturating).unwrap();
    assert!(check_multiplication(-16, 15, 8, s8));
    assert!(!check_multiplication(-16, 15, 9, s8));
}

#[test]
fn float_overflow_check_examples() {
    let f = f34();
    let z = DyadicRational::zero();
    assert!(float_overflow_check(&d("-1"), &d("2"), 3, &d("1"), f));
    assert!(float_overflow_check(&z, &z, 1000, &z, f));
    let max = f.max_finite().to_exact().unwrap();
    assert!(!float_overflow_check(&z, &max, 2, &z, f));
    // Just below the boundary the accuracy slack decides.
    assert!(float_overflow_check(&z, &d("120"), 2, &d("0"), f));
    assert!(!float_overflow_check(&z, &d("120"), 2, &d("16"), f));
}

#[test]
fn kahan_is_more_accurate_than_iterative_in_aggregate() {
    let f = FloatFormat::new(6, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (mut ek, mut ei) = (DyadicRational::zero(), DyadicRational::zero());
    let mut worse = 0;
    for _ in 0..500 {
        let xs: Vec<_> = (0..64)
            .map(|_| round(&DyadicRational::from_f64(rng.random_range(0.0..8.0)).unwrap(), f, B))
            .collect();
        let ds = fds(f, &xs);
        let exact = bs_exact(&ds).unwrap();
        let k = (bs_kahan(&ds, B).unwrap().to_exact().unwrap() - &exact).abs();
        let i = (bs_iterative(&ds, B).unwrap().to_exact().unwrap() - &exact).abs();
        if k > i {
            worse += 1;
        }
        ek = ek + k;
        ei = ei + i;
    }
    assert!(ek.clone() * DyadicRational::from_int(2) < ei, "kahan not clearly better: {} vs {}", ek.to_f64(), ei.to_f64());
    assert!(worse < 25, "kahan worse on {worse} of 500");
}

fn arb_runs(fmt: FloatFormat) -> impl Strategy<Value = Vec<(SimFloat, u64)>> {
    // Small enough magnitudes that no partial sum overflows.
    let lim = DyadicRational::from_int(64);
    let vals: Vec<_> = fmt
        .enumerate_finite()
        .into_iter()
        .filter(|x| x.to_exact().unwrap().abs() < lim)
        .collect();
    prop::collection::vec((prop::sample::select(vals), 1u64..40), 1..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn run_length_shortcuts_match_naive_loops(runs in arb_runs(FloatFormat::new(4, 5).unwrap()), mode in prop::sample::select(vec![Rounding::Banker, Rounding::TowardZero])) {
        let f = FloatFormat::new(4, 5).unwrap();
        let flat: Vec<SimFloat> = runs.iter().flat_map(|(x, c)| std::iter::repeat_n(*x, *c as usize)).collect();
        let a = FloatArith::new(f, mode);
        let ds = Dataset::from_runs(f.min_finite(), f.max_finite(), runs.clone()).unwrap();
        prop_assert_eq!(bs_iterative(&ds, mode).unwrap(), naive_iterative(&flat, mode));
        prop_assert_eq!(pairwise(&a, &runs).unwrap(), naive_pairwise(&flat, mode));
        prop_assert_eq!(kahan(&a, &runs).unwrap(), naive_kahan(&flat, mode));
    }

    #[test]
    fn int_run_shortcut_matches_loop(xs in prop::collection::vec((-128i128..128, 1u64..300), 1..6), sat in any::<bool>()) {
        let f = IntFormat::new(8, true, if sat { Overflow::Saturating } else { Overflow::Wraparound }).unwrap();
        let mut s = KInt::new(f, 0).unwrap();
        for (x, c) in &xs {
            for _ in 0..*c {
                s = s.add(&KInt::new(f, *x).unwrap());
            }
        }
        let ds = Dataset::from_runs(
            KInt::new(f, -128).unwrap(),
            KInt::new(f, 127).unwrap(),
            xs.iter().map(|(x, c)| (KInt::new(f, *x).unwrap(), *c)),
        ).unwrap();
        prop_assert_eq!(bs_iterative(&ds, B).unwrap(), s);
    }

    #[test]
    fn split_is_invariant_under_sign_preserving_interleavings(
        xs in prop::collection::vec(-20i64..20, 0..12), seed in any::<u64>()
    ) {
        let f = f34();
        let vals: Vec<SimFloat> = xs.iter().map(|&x| round(&DyadicRational::new(x, -2), f, B)).collect();
        let (neg, pos): (Vec<_>, Vec<_>) = vals.iter().partition(|x| x.is_negative());
        // Random interleaving that keeps each subsequence in order.
        let mut order: Vec<bool> = neg.iter().map(|_| true).chain(pos.iter().map(|_| false)).collect();
        shuffle(&mut order, seed);
        let (mut i, mut j) = (0, 0);
        let mixed: Vec<SimFloat> = order.iter().map(|&is_neg| {
            if is_neg { i += 1; neg[i - 1] } else { j += 1; pos[j - 1] }
        }).collect();
        prop_assert_eq!(bs_split(&fds(f, &vals)).unwrap(), bs_split(&fds(f, &mixed)).unwrap());
    }

    #[test]
    fn encoded_elements_round_trip(x in prop::sample::select(f34().enumerate_finite())) {
        prop_assert_eq!(SimFloat::decode(f34(), &x.encode()).unwrap(), x);
    }
}
