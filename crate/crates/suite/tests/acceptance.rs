//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::panic;
use std::process::ExitCode;
use std::time::Instant;

use boundsum::attacks::{
    float_reorder_attack, overflow_attack, repeated_rounding_2_prediction, repeated_rounding_attack_1,
    repeated_rounding_attack_2, rounding_attack, saturation_reorder_attack, verify_attack, AttackInstance,
};
use boundsum::mechanism::{
    compare_exp, distinguishing_experiment, dp_violation_log2_bound, exact_dp_check, instance_spec,
    MechanismSpec, Noise, Verdict,
};
use boundsum::metrics::{couple_co, couple_sym, d_sym, distance_slices, histogram, Dataset, Distance, Metric};
use boundsum::sensitivity::{
    accuracy_bound, attack_lower, brute_force_sensitivity, idealized_sensitivity,
    implemented_sensitivity_bound, modular_sensitivity_bound, ElementFormat, SensSpec,
};
use boundsum::summation::{bs_exact, float_overflow_check, run_method, Algorithm, SumElement, SumMethod, Transform};
use boundsum::{DyadicRational, Element, Error, FloatFormat, IntFormat, KInt, Overflow, Rounding, SimFloat};
use num_rational::BigRational;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn p2(e: i64) -> DyadicRational {
    DyadicRational::pow2(e)
}

fn int(v: i128) -> DyadicRational {
    DyadicRational::from_int(v)
}

fn d(s: &str) -> DyadicRational {
    s.parse().unwrap()
}

fn ff(k: u32, l: u32) -> FloatFormat {
    FloatFormat::new(k, l).unwrap()
}

fn rat(n: i64, den: i64) -> BigRational {
    BigRational::new(n.into(), den.into())
}

fn param<T: Element>(i: &AttackInstance<T>, name: &str) -> i64 {
    i.params.iter().find(|(k, _)| k == name).unwrap().1
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn rounding_at_double() -> Check {
    let t = Instant::now();
    let i = rounding_attack(ff(52, 11), 4, -1).unwrap();
    let gap = verify_attack(&i, &i.native).unwrap();
    let s = secs(t);
    ensure!(i.u.len() == 17 && i.v.len() == 17, "n = {}, {}", i.u.len(), i.v.len());
    ensure!(gap == p2(-49), "gap {gap}");
    ensure!(i.idealized == p2(-53), "U - L = {}", i.idealized);
    ensure!(i.blowup == rat(16, 1), "blowup {}", i.blowup);
    ensure!(s < 1.0, "took {s:.3}s");
    Ok(format!("n=17, gap {gap}, blowup 16, {s:.3}s"))
}

fn overflow() -> Check {
    let mut notes = vec![];
    for (bits, upper, want) in [(8, 16i128, int(255)), (64, 1 << 47, int((1i128 << 64) - 1))] {
        let t = Instant::now();
        let f = IntFormat::new(bits, false, Overflow::Wraparound).unwrap();
        let i = overflow_attack(f, 0, upper).unwrap();
        let gap = verify_attack(&i, &i.native).unwrap();
        let s = secs(t);
        ensure!(gap == want, "u{bits}: gap {gap}, want {want}");
        ensure!(s < 1.0, "u{bits}: took {s:.3}s");
        notes.push(format!("u{bits} n={} runs={} gap {gap} {s:.3}s", param(&i, "n"), i.v.runs().len()));
    }
    Ok(notes.join(", "))
}

fn float_reorder() -> Check {
    let i = float_reorder_attack(ff(4, 6), 0, 0, 1, false).unwrap();
    let gap = verify_attack(&i, &i.native).unwrap();
    ensure!(d_sym(&i.u, &i.v) == Distance::Finite(0), "d_sym {}", d_sym(&i.u, &i.v));
    ensure!(gap >= int(32), "(4,6) gap {gap}");
    let t = Instant::now();
    let big = float_reorder_attack(ff(23, 8), 0, 0, 1, false).unwrap();
    let big_gap = verify_attack(&big, &big.native).unwrap();
    let s = secs(t);
    ensure!(big_gap == p2(24), "(23,8) gap {big_gap}");
    ensure!(s < 30.0, "(23,8) took {s:.2}s");
    Ok(format!(
        "(4,6) gap {gap} at d_sym 0; (23,8) n={} in {} runs, gap {big_gap}, {s:.2}s",
        big.u.len(),
        big.u.runs().len()
    ))
}

fn repeated_rounding_2() -> Check {
    let i = repeated_rounding_attack_2(ff(8, 7), 7, 0).unwrap();
    let gap = verify_attack(&i, &i.native).unwrap();
    let n = int(i.u.len() as i128);
    let u = i.u.upper().to_exact().unwrap();
    let formula = &(&n * &n).mul_pow2(-(8 + 3)) * &u + u.clone();
    ensure!(formula == &int(9) * &u, "n^2/2^(k+3)·U + U = {formula}");
    ensure!(gap == formula, "gap {gap}, formula {formula}");
    let p = repeated_rounding_2_prediction(ff(52, 11), 30, 0).unwrap();
    ensure!(p.len_u == 1 << 30, "len {}", p.len_u);
    ensure!(p.predicted_gap == int(33), "predicted {}", p.predicted_gap);
    let big = repeated_rounding_attack_2(ff(52, 11), 30, 0);
    ensure!(matches!(big, Err(Error::TooLarge(_))), "64-bit instance was materialized");
    Ok(format!(
        "(8,7) n={} gap {gap} = 9·U; (52,11) j=30 predicted {} with n=2^30, not materialized",
        i.u.len(),
        p.predicted_gap
    ))
}

fn repeated_rounding_1() -> Check {
    let t = Instant::now();
    let i = repeated_rounding_attack_1(ff(6, 7), 3, 0).unwrap();
    let gap = verify_attack(&i, &i.native).unwrap();
    let s = secs(t);
    ensure!(gap == int(512), "gap {gap}");
    ensure!(i.blowup == rat(8, 1), "blowup {}", i.blowup);
    ensure!(s < 10.0, "took {s:.2}s");
    Ok(format!("n={} gap {gap}, blowup 8, {s:.3}s", i.u.len()))
}

fn neutralized<T: SumElement>(
    name: &str,
    inst: &AttackInstance<T>,
    split: &SumMethod,
    record: &mut impl FnMut(String, bool, String),
) {
    let g = verify_attack(inst, split).unwrap();
    let example = format!("gap {g} > idealized {}", inst.idealized);
    record(format!("{name} neutralized by {}", split.algorithm.name()), g <= inst.idealized, example);
    for seed in 0..100u64 {
        let rp = SumMethod::iterative().with(Transform::RandomPermutation { seed });
        let g = verify_attack(inst, &rp).unwrap();
        let example = format!("seed {seed}: gap {g} > idealized {}", inst.idealized);
        record(format!("{name} neutralized by RP+iterative"), g <= inst.idealized, example);
    }
}

// Failing cells are grouped by (attack, method) with the first example.
fn resistance_matrix() -> Check {
    let banker = |alg| SumMethod::new(alg, Rounding::Banker);
    let mut bad: BTreeMap<String, (u32, String)> = BTreeMap::new();
    let mut checked = 0;
    let mut record = |cell: String, holds: bool, example: String| {
        checked += 1;
        if !holds {
            bad.entry(cell).or_insert((0, example)).0 += 1;
        }
    };
    for (k, l, j, m) in [(52, 11, 4, -1), (8, 6, 3, 0), (10, 5, 2, 1)] {
        let i = rounding_attack(ff(k, l), j, m).unwrap();
        for alg in [Algorithm::Kahan, Algorithm::Pairwise] {
            let g = verify_attack(&i, &banker(alg)).unwrap();
            let example = format!("({k},{l}) gap {g} vs {}", i.predicted_gap);
            record(format!("rounding gap unchanged under {}", alg.name()), g == i.predicted_gap, example);
        }
    }
    let i8s = IntFormat::new(8, true, Overflow::Saturating).unwrap();
    let sr = saturation_reorder_attack(i8s, -64, 64).unwrap();
    let fr = float_reorder_attack(ff(4, 6), 0, 0, 1, false).unwrap();
    let fr_drop = float_reorder_attack(ff(4, 6), 0, 0, 1, true).unwrap();
    let split_int = banker(Algorithm::SplitInt);
    let split_float = SumMethod::new(Algorithm::SplitFloatRtz, Rounding::TowardZero);
    neutralized("saturation_reorder", &sr, &split_int, &mut record);
    neutralized("float_reorder", &fr, &split_float, &mut record);
    neutralized("float_reorder drop_last", &fr_drop, &split_float, &mut record);
    if bad.is_empty() {
        return Ok(format!("{checked} cells hold"));
    }
    let failing: u32 = bad.values().map(|(n, _)| n).sum();
    let cells: Vec<String> = bad.iter().map(|(c, (n, e))| format!("{c}: {n} failing, e.g. {e}")).collect();
    Err(format!("{failing} of {checked} cells fail: {}", cells.join("; ")))
}

fn accuracy_soundness() -> Check {
    let f = ff(6, 8);
    let finite = f.enumerate_finite();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc);
    let algs = [Algorithm::Iterative, Algorithm::Pairwise, Algorithm::Kahan];
    let mut checks = [0u32; 3];
    let mut skipped = [0u32; 3];
    let mut worst = [0f64; 3];
    for _ in 0..1000 {
        let a = *finite.choose(&mut rng).unwrap();
        let b = *finite.choose(&mut rng).unwrap();
        let (lo, hi) = (a.min(b), a.max(b));
        let dom: Vec<SimFloat> = finite.iter().copied().filter(|x| *x >= lo && *x <= hi).collect();
        let n = rng.random_range(1..=200u64);
        let xs: Vec<SimFloat> = (0..n).map(|_| *dom.choose(&mut rng).unwrap()).collect();
        let ds = Dataset::new(lo, hi, xs).unwrap();
        let exact = bs_exact(&ds).unwrap();
        let (l, u) = (lo.to_exact().unwrap(), hi.to_exact().unwrap());
        for (i, alg) in algs.iter().enumerate() {
            // Outside its precondition a bound makes no claim.
            let Ok(acc) = accuracy_bound(*alg, n, f, &l, &u) else {
                skipped[i] += 1;
                continue;
            };
            if !float_overflow_check(&l, &u, n, &acc, f) {
                skipped[i] += 1;
                continue;
            }
            let got = run_method(&SumMethod::new(*alg, Rounding::Banker), &ds).unwrap().value;
            let err = (got.to_exact().unwrap() - exact.clone()).abs();
            ensure!(err <= acc, "{} n={n} [{l}, {u}]: error {err} > bound {acc}", alg.name());
            checks[i] += 1;
            if !acc.is_zero() {
                worst[i] = worst[i].max(err.to_f64() / acc.to_f64());
            }
        }
    }
    Ok(format!(
        "0 violations; checked iterative/pairwise/kahan {checks:?}, outside preconditions {skipped:?}, worst error/bound {:.3}/{:.3}/{:.3}",
        worst[0], worst[1], worst[2]
    ))
}

fn spec(fmt: ElementFormat, lo: &str, hi: &str, metric: Metric, n: u64, method: &str) -> SensSpec {
    SensSpec::new(fmt, d(lo), d(hi), metric, Some(n), method.parse().unwrap()).unwrap()
}

fn sandwich() -> Check {
    let t = Instant::now();
    let float_methods = [
        "iterative",
        "iterative/rtz",
        "pairwise",
        "kahan",
        "split_float_rtz",
        "iterative+permute:0",
        "split_float_rtz+permute:0",
        "iterative+truncate:2",
        "kahan+permute:0+truncate:1",
        "pairwise/rtz+permute:3",
        "iterative+shift",
    ];
    let int_methods = [
        "iterative",
        "pairwise",
        "kahan",
        "split_int",
        "iterative+permute:0",
        "split_int+permute:0",
        "iterative+truncate:2",
        "pairwise+permute:0+truncate:1",
        "iterative+shift",
    ];
    let mut grids: Vec<(ElementFormat, &[&str], Vec<String>)> = vec![(
        ElementFormat::Float(ff(2, 3)),
        &float_methods,
        ["-14", "-3", "-0.75", "0", "0.25", "0.5", "2", "7", "14"].map(String::from).to_vec(),
    )];
    for bits in [3u32, 4] {
        for signed in [false, true] {
            for o in [Overflow::Wraparound, Overflow::Saturating] {
                let f = IntFormat::new(bits, signed, o).unwrap();
                let vals: Vec<i128> = if bits == 3 {
                    (f.min_value()..=f.max_value()).collect()
                } else if signed {
                    vec![-8, -5, -1, 0, 1, 3, 7]
                } else {
                    vec![0, 1, 3, 6, 10, 15]
                };
                grids.push((ElementFormat::Int(f), &int_methods, vals.iter().map(|v| v.to_string()).collect()));
            }
        }
    }
    let mut applicable = 0u64;
    let mut tight = 0u64;
    for (fmt, methods, vals) in &grids {
        for m in methods.iter() {
            for (i, lo) in vals.iter().enumerate() {
                for hi in &vals[i..] {
                    for metric in Metric::ALL {
                        for n in 1..=3 {
                            let s = spec(*fmt, lo, hi, metric, n, m);
                            let Ok(up) = implemented_sensitivity_bound(&s) else { continue };
                            let what = format!("{fmt} {m} [{lo},{hi}] {metric} n={n}");
                            let bf = brute_force_sensitivity(&s).map_err(|e| format!("{what}: brute force: {e}"))?;
                            let low = attack_lower(&s).map_err(|e| format!("{what}: attack lower: {e}"))?;
                            let bf = bf.bound.value;
                            ensure!(
                                low.value <= bf && bf <= up.value,
                                "{what}: {} <= {bf} <= {} fails",
                                low.value,
                                up.value
                            );
                            applicable += 1;
                            tight += u64::from(bf == up.value);
                        }
                    }
                }
            }
        }
    }
    let s = secs(t);
    ensure!(s < 300.0, "took {s:.1}s");
    Ok(format!("{applicable} applicable specs, upper bound tight on {tight}, {s:.1}s"))
}

fn modular_dp() -> Check {
    let f = IntFormat::new(8, false, Overflow::Wraparound).unwrap();
    ensure!(f.modulus() == 256, "modulus {}", f.modulus());
    let eps = rat(1, 2);
    let inst = overflow_attack(f, 0, 16).unwrap();
    let sens = instance_spec(&inst).unwrap();
    let modular = modular_sensitivity_bound(&sens).unwrap();
    let good = MechanismSpec::calibrated(sens.clone(), Noise::DiscreteLaplaceMod, eps.clone(), modular.clone()).unwrap();
    let c = exact_dp_check(&good, &inst.u, &inst.v, &eps).unwrap();
    ensure!(c.within, "modular noise ratio {} exceeds e^eps", c.max_ratio);
    ensure!(compare_exp(&c.max_ratio, &eps).unwrap() != Ordering::Greater, "modular ratio above e^eps");
    let bad = MechanismSpec::calibrated(sens, Noise::DiscreteLaplace, eps.clone(), modular).unwrap();
    let s = exact_dp_check(&bad, &inst.u, &inst.v, &eps).unwrap();
    let ten = &eps * BigRational::from_integer(10.into());
    ensure!(
        compare_exp(&s.max_ratio, &ten).unwrap() == Ordering::Greater,
        "saturating ln ratio {} not above 10·eps",
        s.ln_max_ratio
    );
    Ok(format!(
        "m=2^8, eps=1/2: modular ln ratio {:.4} <= 0.5; saturating ln ratio {:.4} > 5",
        c.ln_max_ratio, s.ln_max_ratio
    ))
}

fn experiments() -> Check {
    let t = Instant::now();
    let f = IntFormat::new(64, false, Overflow::Wraparound).unwrap();
    let inst = overflow_attack(f, 0, 1 << 47).unwrap();
    let sens = instance_spec(&inst).unwrap();
    let eps = rat(1, 2);
    let vulnerable =
        MechanismSpec::calibrated(sens.clone(), Noise::DiscreteLaplace, eps, idealized_sensitivity(&sens)).unwrap();
    let r = distinguishing_experiment(&inst, &vulnerable, None, 10_000, 2024).unwrap();
    let s = secs(t);
    ensure!(r.verdict == Verdict::Violation, "verdict {:?}", r.verdict);
    ensure!(r.log2_probability_bound <= -12_000.0, "bound {}", r.log2_probability_bound);
    ensure!(s < 120.0, "took {s:.1}s");
    let hand = dp_violation_log2_bound([[1, 9], [10, 0]], 1.0);
    ensure!(hand < 0.015f64.log2(), "(9/1, 0/10) bound {hand}");
    Ok(format!(
        "u64 overflow pair, counts {:?}, log2 bound {:.1}, {s:.1}s; (9/1, 0/10) at eps=1: {:.3} < {:.3}",
        r.counts,
        r.log2_probability_bound,
        hand,
        0.015f64.log2()
    ))
}

fn coupling() -> Check {
    let f = IntFormat::new(8, true, Overflow::Wraparound).unwrap();
    let k = |v: i128| KInt::new(f, v).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..1000 {
        let n = rng.random_range(0..15);
        let u: Vec<KInt> = (0..n).map(|_| k(rng.random_range(-4..5))).collect();
        let mut u2 = u.clone();
        u2.shuffle(&mut rng);
        match rng.random_range(0..3) {
            0 => {}
            1 => u2.push(k(rng.random_range(-4..5))),
            _ => {
                u2.pop();
            }
        }
        ensure!(distance_slices(Metric::Sym, &u, &u2).is_adjacent(), "sym trial {trial}: not adjacent");
        let mut pu = u.clone();
        pu.shuffle(&mut rng);
        let pu2 = couple_sym(&pu, &u2, &mut rng).map_err(|e| e.to_string())?;
        ensure!(histogram(&pu2) == histogram(&u2), "sym trial {trial}: coupled side is not a permutation");
        let dist = distance_slices(Metric::Id, &pu, &pu2);
        ensure!(dist.is_adjacent(), "sym trial {trial}: d_id = {dist}");
    }
    for trial in 0..1000 {
        let n = rng.random_range(1..15);
        let u: Vec<KInt> = (0..n).map(|_| k(rng.random_range(-4..5))).collect();
        let mut u2 = u.clone();
        u2[rng.random_range(0..n)] = k(rng.random_range(-4..5));
        u2.shuffle(&mut rng);
        ensure!(distance_slices(Metric::Co, &u, &u2).is_adjacent(), "co trial {trial}: not adjacent");
        let mut pu = u.clone();
        pu.shuffle(&mut rng);
        let pu2 = couple_co(&pu, &u2).map_err(|e| e.to_string())?;
        ensure!(histogram(&pu2) == histogram(&u2), "co trial {trial}: coupled side is not a permutation");
        let dist = distance_slices(Metric::Ham, &pu, &pu2);
        ensure!(dist.is_adjacent(), "co trial {trial}: d_ham = {dist}");
    }
    Ok("1000 sym pairs with d_id <= 1, 1000 co pairs with d_ham <= 1".into())
}

// Brute force over n <= 3 costs d^3 sums, so wide ranges stop at the largest
// length that keeps d^n under the budget.
const SPLIT_BUDGET: u64 = 300_000;

fn split_rtz_global() -> Check {
    let t = Instant::now();
    let f = ff(3, 4);
    let fmt = ElementFormat::Float(f);
    let finite = f.enumerate_finite();
    let grid = ["-240", "-112", "-15", "-3.5", "-1", "-0.125", "0", "0.0625", "0.5", "1", "2.5", "7", "15", "112", "240"];
    let mut ranges: Vec<(DyadicRational, DyadicRational)> = vec![];
    for (i, lo) in grid.iter().enumerate() {
        for hi in &grid[i..] {
            ranges.push((d(lo), d(hi)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for _ in 0..60 {
        let a = finite.choose(&mut rng).unwrap().to_exact().unwrap();
        let b = finite.choose(&mut rng).unwrap().to_exact().unwrap();
        ranges.push((a.clone().min(b.clone()), a.max(b)));
    }
    let method: SumMethod = "split_float_rtz".parse().unwrap();
    let mut runs = 0;
    let mut full_depth = 0;
    let mut worst = [0f64; 2];
    for (lo, hi) in &ranges {
        let size = finite.iter().filter(|x| {
            let q = x.to_exact().unwrap();
            q >= *lo && q <= *hi
        });
        let size = size.count() as u64;
        let n_max = (1..=3u32).rev().find(|&n| size.pow(n) <= SPLIT_BUDGET).unwrap_or(1) as u64;
        full_depth += u64::from(n_max == 3);
        let m = lo.abs().max(hi.abs());
        for metric in Metric::ALL {
            let (factor, ns): (i128, Vec<u64>) = if metric.known_n() {
                (5, (1..=n_max).collect())
            } else {
                (3, vec![n_max])
            };
            for n in ns {
                let s = SensSpec::new(fmt, lo.clone(), hi.clone(), metric, Some(n), method.clone()).unwrap();
                let bf = brute_force_sensitivity(&s).map_err(|e| format!("[{lo},{hi}] {metric} n={n}: {e}"))?;
                let cap = &int(factor) * &m;
                let v = bf.bound.value;
                ensure!(v <= cap, "[{lo},{hi}] {metric} n={n}: {v} > {factor}·{m}");
                runs += 1;
                if !m.is_zero() {
                    let w = &mut worst[usize::from(metric.known_n())];
                    *w = w.max(v.to_f64() / m.to_f64());
                }
            }
        }
    }
    Ok(format!(
        "{} ranges ({full_depth} at n<=3), {runs} brute-force runs; worst ratio to max{{U,|L|}}: {:.3} unknown-n, {:.3} known-n; {:.1}s",
        ranges.len(),
        worst[0],
        worst[1],
        secs(t)
    ))
}

fn panic_message(e: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = e.downcast_ref::<&str>() {
        format!("panicked: {s}")
    } else if let Some(s) = e.downcast_ref::<String>() {
        format!("panicked: {s}")
    } else {
        "panicked".into()
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 12] = [
        ("rounding attack at (52,11)", rounding_at_double),
        ("overflow attack, u8 and u64", overflow),
        ("float reorder attack", float_reorder),
        ("repeated rounding II", repeated_rounding_2),
        ("repeated rounding I", repeated_rounding_1),
        ("attack resistance matrix", resistance_matrix),
        ("accuracy bound soundness", accuracy_soundness),
        ("brute-force sandwich", sandwich),
        ("exact DP, modular vs saturating noise", modular_dp),
        ("distinguishing experiments", experiments),
        ("coupling", coupling),
        ("split + round-toward-zero global bound", split_rtz_global),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = panic::catch_unwind(check).unwrap_or_else(|e| Err(panic_message(e)));
        let s = secs(t);
        match result {
            Ok(detail) => println!("criterion {:>2}: PASS  {name}: {detail} [{s:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2}: FAIL  {name}: {detail} [{s:.2}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
