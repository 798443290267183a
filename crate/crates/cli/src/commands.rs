use std::path::{Path, PathBuf};
use std::str::FromStr;

use boundsum::attacks::{
    float_reorder_attack, overflow_attack, overflow_attack_ham, repeated_rounding_2_prediction,
    repeated_rounding_attack_1, repeated_rounding_attack_2, rounding_attack, saturation_reorder_attack,
    verify_attack, AttackInstance, AttackKind,
};
use boundsum::mechanism::{
    distinguishing_experiment, exact_dp_check, instance_spec, MechanismSpec, Noise, Verdict,
};
use boundsum::metrics::{distance, Dataset, Metric};
use boundsum::numeric::parse_decimal;
use boundsum::sensitivity::{
    attack_lower, blowup_factor, brute_force_sensitivity, idealized_sensitivity,
    implemented_sensitivity_bound, modular_sensitivity_bound, recommend, Constraints, ElementFormat,
    SensSpec, SensitivityBound,
};
use boundsum::summation::{bs_exact, run_method, run_method_exact, SumMethod};
use boundsum::{DyadicRational, FloatFormat, IntFormat, KInt, Overflow, SimFloat};
use num_rational::BigRational;
use serde_json::{json, Map, Value};

use crate::io::{
    dataset_json, input, instance_json, rational_string, read_dataset, read_instance, render, write_file,
    AnyDataset, AnyInstance, CliElement, CliError, CliResult, SCHEMA,
};
use crate::{
    AttackGenArgs, AttackVerifyArgs, DpcheckArgs, ExperimentArgs, MechanismArgs, OutArgs, RecommendArgs,
    SensBoundArgs, SpecArgs, SumArgs,
};

/// Whether the command's check passed (exit 0) or failed (exit 3).
pub struct Outcome {
    pub passed: bool,
}

const OK: Outcome = Outcome { passed: true };

fn flag<T: FromStr>(name: &str, s: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| CliError::Input(format!("{name}: {e}")))
}

fn need<T: Copy>(name: &str, v: Option<T>, what: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Input(format!("{name}: required for {what}")))
}

fn rational(name: &str, s: &str) -> CliResult<BigRational> {
    parse_decimal(s).ok_or_else(|| {
        CliError::Input(format!("{name}: expected an exact decimal or fraction, got {s:?}"))
    })
}

/// An exact value given as a dyadic, a decimal, or a float bit pattern.
fn exact_value(name: &str, fmt: ElementFormat, s: &str) -> CliResult<DyadicRational> {
    let t = s.trim();
    if let (ElementFormat::Float(f), true) = (fmt, t.starts_with("0x")) {
        let x = SimFloat::from_hex(f, t).map_err(|e| CliError::Input(format!("{name}: {e}")))?;
        return x.to_exact().map_err(|e| CliError::Input(format!("{name}: {e}")));
    }
    flag(name, t)
}

fn manifest(command: &str, parameters: Map<String, Value>, seeds: Map<String, Value>, citations: Vec<String>) -> Value {
    let epoch = std::env::var("SOURCE_DATE_EPOCH").ok();
    json!({
        "command": command,
        "parameters": parameters,
        "seeds": seeds,
        "versions": { "boundsum-core": boundsum::VERSION, "boundsum-cli": env!("CARGO_PKG_VERSION") },
        "citations": citations,
        "timestamps": { "source_date_epoch": epoch },
    })
}

fn report(kind: &str, manifest: Value, body: Map<String, Value>) -> Value {
    let mut m = body;
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("kind".into(), json!(kind));
    m.insert("manifest".into(), manifest);
    Value::Object(m)
}

fn emit(out: &OutArgs, name: &str, v: &Value) -> CliResult<()> {
    print!("{}", render(v));
    if let Some(dir) = &out.out {
        make_dir(dir)?;
        write_file(&dir.join(name), v)?;
    }
    Ok(())
}

fn make_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("out: cannot create {}: {e}", dir.display())))
}

fn params(pairs: &[(&str, Option<String>)]) -> Map<String, Value> {
    pairs
        .iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), json!(v))))
        .collect()
}

fn bound_json(b: &SensitivityBound, ideal: &DyadicRational) -> Value {
    json!({
        "kind": b.kind.name(),
        "value": b.value.to_string(),
        "approx": format!("{:e}", b.value.to_f64()),
        "source": b.source,
        "blowup": blowup_factor(&b.value, ideal).map(|x| format!("{x}")),
    })
}

// ---------------------------------------------------------------------------
// sum

pub fn sum(a: &SumArgs) -> CliResult<Outcome> {
    let ds = read_dataset(&a.input, "in")?;
    let mut method: SumMethod = flag("method", &a.method)?;
    if let Some(r) = &a.rounding {
        method.rounding = flag("rounding", r)?;
    }
    if let Some(s) = a.seed {
        method = method.reseeded(s);
    }
    let body = match &ds {
        AnyDataset::Float(d) => sum_typed(d, &method)?,
        AnyDataset::Int(d) => sum_typed(d, &method)?,
    };
    let mut body = body;
    body.insert("format".into(), json!(ds.format().to_string()));
    let m = manifest(
        "sum",
        params(&[
            ("in", Some(a.input.display().to_string())),
            ("method", Some(method.to_string())),
        ]),
        a.seed.map(|s| ("permutation".to_string(), json!(s))).into_iter().collect(),
        vec![],
    );
    emit(&a.out, "sum.json", &report("sum_report", m, body))?;
    Ok(OK)
}

fn sum_typed<T: CliElement>(d: &Dataset<T>, method: &SumMethod) -> CliResult<Map<String, Value>> {
    let out = run_method(method, d)?;
    let exact = run_method_exact(method, d)?;
    let reference = bs_exact(d)?;
    let err = (exact.clone() - reference.clone()).abs();
    let mut m = Map::new();
    m.insert("method".into(), json!(method.to_string()));
    m.insert("n".into(), json!(d.len()));
    m.insert("value".into(), json!(out.value.encode()));
    m.insert("exact".into(), json!(exact.to_string()));
    m.insert("exact_sum".into(), json!(reference.to_string()));
    m.insert("abs_error".into(), json!(err.to_string()));
    m.insert("clamped".into(), json!(out.clamped));
    if let Some((l, n)) = out.offset {
        m.insert("offset".into(), json!({ "lower": l.encode(), "n": n }));
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// sens

fn build_spec(a: &SpecArgs) -> CliResult<(SensSpec, Map<String, Value>)> {
    let ds = a.input.as_ref().map(|p| read_dataset(p, "in")).transpose()?;
    let format: ElementFormat = match (&a.format, &ds) {
        (Some(f), _) => flag("format", f)?,
        (None, Some(d)) => d.format(),
        (None, None) => return input("format: required (or give --in)"),
    };
    let bound = |name: &str, given: &Option<String>, i: usize| -> CliResult<DyadicRational> {
        match (given, &ds) {
            (Some(s), _) => exact_value(name, format, s),
            (None, Some(d)) => Ok(if i == 0 { d.bounds().0 } else { d.bounds().1 }),
            (None, None) => input(format!("{name}: required (or give --in)")),
        }
    };
    let lower = bound("lower", &a.lower, 0)?;
    let upper = bound("upper", &a.upper, 1)?;
    let metric: Metric = flag("metric", &a.metric)?;
    let method: SumMethod = flag("method", &a.method)?;
    let n = a.n.or(ds.as_ref().map(AnyDataset::len));
    let spec = SensSpec::new(format, lower, upper, metric, n, method)?;
    let p = params(&[
        ("in", a.input.as_ref().map(|p| p.display().to_string())),
        ("format", Some(spec.format.to_string())),
        ("lower", Some(spec.lower.to_string())),
        ("upper", Some(spec.upper.to_string())),
        ("metric", Some(spec.metric.to_string())),
        ("n", spec.n.map(|n| n.to_string())),
        ("method", Some(spec.method.to_string())),
    ]);
    Ok((spec, p))
}

pub fn sens_bound(a: &SensBoundArgs) -> CliResult<Outcome> {
    let (spec, mut p) = build_spec(&a.spec)?;
    p.insert("kind".into(), json!(a.kind));
    let ideal = idealized_sensitivity(&spec);
    let all = a.kind == "all";
    let wanted = |k: &str| all || a.kind == k;
    if !all && !["idealized", "implemented", "modular", "attack"].contains(&a.kind.as_str()) {
        return input(format!(
            "kind: unknown {:?} (expected all, idealized, implemented, modular or attack)",
            a.kind
        ));
    }
    let mut bounds = Vec::new();
    let mut citations = Vec::new();
    type Compute = fn(&SensSpec) -> boundsum::Result<SensitivityBound>;
    let table: [(&str, Compute); 4] = [
        ("idealized", |s| Ok(idealized_sensitivity(s))),
        ("implemented", implemented_sensitivity_bound),
        ("modular", modular_sensitivity_bound),
        ("attack", attack_lower),
    ];
    for (name, f) in table {
        if !wanted(name) {
            continue;
        }
        match f(&spec) {
            Ok(b) => {
                citations.push(b.source.clone());
                bounds.push(bound_json(&b, &ideal.value));
            }
            Err(e) if all => bounds.push(json!({ "kind": name, "unavailable": e.to_string() })),
            Err(e) => return Err(e.into()),
        }
    }
    let mut body = Map::new();
    body.insert("bounds".into(), Value::Array(bounds));
    emit(&a.spec.out, "sens_bound.json", &report("sensitivity_bounds", manifest("sens bound", p, Map::new(), citations), body))?;
    Ok(OK)
}

pub fn sens_bruteforce(a: &SpecArgs) -> CliResult<Outcome> {
    let (spec, p) = build_spec(a)?;
    let r = brute_force_sensitivity(&spec)?;
    let ideal = idealized_sensitivity(&spec);
    let mut body = Map::new();
    body.insert("bound".into(), bound_json(&r.bound, &ideal.value));
    body.insert(
        "witness".into(),
        match &r.witness {
            Some((u, v)) => json!({ "u": u, "v": v }),
            None => Value::Null,
        },
    );
    body.insert("evaluations".into(), json!(r.evaluations));
    let m = manifest("sens bruteforce", p, Map::new(), vec![r.bound.source.clone()]);
    emit(&a.out, "sens_bruteforce.json", &report("sensitivity_bruteforce", m, body))?;
    Ok(OK)
}

pub fn sens_recommend(a: &RecommendArgs) -> CliResult<Outcome> {
    let ds = a.input.as_ref().map(|p| read_dataset(p, "in")).transpose()?;
    let format: ElementFormat = match (&a.format, &ds) {
        (Some(f), _) => flag("format", f)?,
        (None, Some(d)) => d.format(),
        (None, None) => return input("format: required (or give --in)"),
    };
    let pick = |name: &str, given: &Option<String>, from: Option<DyadicRational>| match (given, from) {
        (Some(s), _) => exact_value(name, format, s),
        (None, Some(x)) => Ok(x),
        (None, None) => input(format!("{name}: required (or give --in)")),
    };
    let lower = pick("lower", &a.lower, ds.as_ref().map(|d| d.bounds().0))?;
    let upper = pick("upper", &a.upper, ds.as_ref().map(|d| d.bounds().1))?;
    let c = Constraints {
        lower: lower.clone(),
        upper: upper.clone(),
        n: a.n,
        n_max: a.n_max,
    };
    let recs = recommend(format, &c)?;
    let max_abs = lower.abs().max(upper.abs());
    let list: Vec<Value> = recs
        .iter()
        .map(|r| {
            json!({
                "method": r.method.to_string(),
                "metric": r.metric.to_string(),
                "bound": bound_json(&r.bound, &max_abs),
                "note": r.note,
            })
        })
        .collect();
    let p = params(&[
        ("format", Some(format.to_string())),
        ("lower", Some(lower.to_string())),
        ("upper", Some(upper.to_string())),
        ("n", a.n.map(|n| n.to_string())),
        ("n_max", a.n_max.map(|n| n.to_string())),
    ]);
    let citations = recs.iter().map(|r| r.bound.source.clone()).collect();
    let mut body = Map::new();
    body.insert("recommendations".into(), Value::Array(list));
    emit(&a.out, "sens_recommend.json", &report("recommendations", manifest("sens recommend", p, Map::new(), citations), body))?;
    Ok(OK)
}

// ---------------------------------------------------------------------------
// attack

fn float_format(a: &AttackGenArgs, what: &str) -> CliResult<FloatFormat> {
    if let Some(f) = &a.format {
        return match flag::<ElementFormat>("format", f)? {
            ElementFormat::Float(f) => Ok(f),
            ElementFormat::Int(_) => input(format!("format: {what} needs a float format, got {f}")),
        };
    }
    let k = need("k", a.k, what)?;
    let l = need("l", a.l, what)?;
    FloatFormat::new(k, l).map_err(|e| CliError::Input(format!("k, l: {e}")))
}

fn int_format(a: &AttackGenArgs, what: &str) -> CliResult<IntFormat> {
    if let Some(f) = &a.format {
        return match flag::<ElementFormat>("format", f)? {
            ElementFormat::Int(f) => Ok(f),
            ElementFormat::Float(_) => input(format!("format: {what} needs an integer format, got {f}")),
        };
    }
    let bits = need("bits", a.bits, what)?;
    let overflow: Overflow = match &a.overflow {
        Some(o) => flag("overflow", o)?,
        None => return input(format!("overflow: required for {what} (wraparound or saturating)")),
    };
    IntFormat::new(bits, a.signed, overflow).map_err(|e| CliError::Input(format!("bits: {e}")))
}

pub fn attack_gen(a: &AttackGenArgs) -> CliResult<Outcome> {
    let kind: AttackKind = flag("theorem", &a.theorem)?;
    let what = format!("theorem {}", kind.name());
    let what = what.as_str();
    let dir = a.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut p = params(&[
        ("theorem", Some(kind.name().to_string())),
        ("lower", a.lower.map(|x| x.to_string())),
        ("upper", a.upper.map(|x| x.to_string())),
        ("j", a.j.map(|x| x.to_string())),
        ("m", a.m.map(|x| x.to_string())),
        ("a", a.a.map(|x| x.to_string())),
        ("d", a.d.map(|x| x.to_string())),
    ]);
    if a.drop_last {
        p.insert("drop_last".into(), json!("true"));
    }
    let inst = match kind {
        AttackKind::Overflow | AttackKind::OverflowHam | AttackKind::SaturationReorder => {
            let f = int_format(a, what)?;
            let upper = need("upper", a.upper, what)?;
            let lower = match kind {
                AttackKind::SaturationReorder => need("lower", a.lower, what)?,
                _ => a.lower.unwrap_or(0),
            };
            let inst = match kind {
                AttackKind::Overflow => overflow_attack(f, lower, upper)?,
                AttackKind::OverflowHam => overflow_attack_ham(f, lower, upper)?,
                _ => saturation_reorder_attack(f, lower, upper)?,
            };
            KInt::wrap_instance(inst)
        }
        AttackKind::FloatReorder => {
            let f = float_format(a, what)?;
            let inst = float_reorder_attack(
                f,
                need("j", a.j, what)?,
                need("a", a.a, what)?,
                need("d", a.d, what)?,
                a.drop_last,
            )?;
            SimFloat::wrap_instance(inst)
        }
        AttackKind::Rounding | AttackKind::RepeatedRounding1 => {
            let f = float_format(a, what)?;
            let (j, m) = (need("j", a.j, what)?, need("m", a.m, what)?);
            SimFloat::wrap_instance(match kind {
                AttackKind::Rounding => rounding_attack(f, j, m)?,
                _ => repeated_rounding_attack_1(f, j, m)?,
            })
        }
        AttackKind::RepeatedRounding2 => {
            let f = float_format(a, what)?;
            let (j, av) = (need("j", a.j, what)?, need("a", a.a, what)?);
            if a.predict {
                return rr2_prediction(f, j, av, p, &dir);
            }
            SimFloat::wrap_instance(repeated_rounding_attack_2(f, j, av)?)
        }
    };
    let (fmt, body, citation) = match &inst {
        AnyInstance::Float(i) => gen_files(&dir, ElementFormat::Float(i.u.format()), i)?,
        AnyInstance::Int(i) => gen_files(&dir, ElementFormat::Int(i.u.format()), i)?,
    };
    p.insert("format".into(), json!(fmt.to_string()));
    let mut m = manifest("attack gen", p, Map::new(), vec![citation]);
    m["schema"] = json!(SCHEMA);
    m["kind"] = json!("run_manifest");
    m["files"] = body;
    write_file(&dir.join("manifest.json"), &m)?;
    print!("{}", render(&m));
    Ok(OK)
}

fn gen_files<T: CliElement>(dir: &Path, fmt: ElementFormat, inst: &AttackInstance<T>) -> CliResult<(ElementFormat, Value, String)> {
    make_dir(dir)?;
    write_file(&dir.join("u.json"), &dataset_json(fmt, &inst.u))?;
    write_file(&dir.join("v.json"), &dataset_json(fmt, &inst.v))?;
    write_file(&dir.join("instance.json"), &instance_json(fmt, inst, "u.json", "v.json"))?;
    let files = json!([
        { "path": "u.json", "role": "dataset u", "length": inst.u.len() },
        { "path": "v.json", "role": "dataset v", "length": inst.v.len() },
        {
            "path": "instance.json",
            "role": "attack instance",
            "predicted_gap": inst.predicted_gap.to_string(),
            "idealized": inst.idealized.to_string(),
            "blowup": rational_string(&inst.blowup),
        },
    ]);
    Ok((fmt, files, inst.theorem().to_string()))
}

fn rr2_prediction(
    f: FloatFormat,
    j: i64,
    av: i64,
    mut p: Map<String, Value>,
    dir: &Path,
) -> CliResult<Outcome> {
    let pr = repeated_rounding_2_prediction(f, j, av)?;
    p.insert("format".into(), json!(ElementFormat::Float(f).to_string()));
    p.insert("predict".into(), json!("true"));
    let body = json!({
        "lower": pr.lower.to_string(),
        "upper": pr.upper.to_string(),
        "length_u": pr.len_u,
        "length_v": pr.len_v,
        "predicted_gap": pr.predicted_gap.to_string(),
        "idealized": pr.idealized.to_string(),
        "blowup": rational_string(&pr.blowup),
    });
    let mut m = manifest("attack gen", p, Map::new(), vec![AttackKind::RepeatedRounding2.citation().to_string()]);
    m["schema"] = json!(SCHEMA);
    m["kind"] = json!("run_manifest");
    m["prediction"] = body;
    make_dir(dir)?;
    write_file(&dir.join("manifest.json"), &m)?;
    print!("{}", render(&m));
    Ok(OK)
}

pub fn attack_verify(a: &AttackVerifyArgs) -> CliResult<Outcome> {
    let inst = read_instance(&a.instance)?;
    let (body, passed, citation, method) = match &inst {
        AnyInstance::Float(i) => verify_typed(i, a)?,
        AnyInstance::Int(i) => verify_typed(i, a)?,
    };
    let p = params(&[
        ("instance", Some(a.instance.display().to_string())),
        ("method", Some(method)),
    ]);
    let seeds = a.seed.map(|s| ("permutation".to_string(), json!(s))).into_iter().collect();
    emit(&a.out, "verify.json", &report("attack_verification", manifest("attack verify", p, seeds, vec![citation]), body))?;
    Ok(Outcome { passed })
}

fn verify_typed<T: CliElement>(
    inst: &AttackInstance<T>,
    a: &AttackVerifyArgs,
) -> CliResult<(Map<String, Value>, bool, String, String)> {
    let mut method = match &a.method {
        Some(m) => flag("method", m)?,
        None => inst.native.clone(),
    };
    if let Some(s) = a.seed {
        method = method.reseeded(s);
    }
    let realized = verify_attack(inst, &method)?;
    let dist = distance(inst.metric, &inst.u, &inst.v)?;
    let adjacent = dist.finite() == Some(inst.adjacency_distance);
    let holds = realized >= inst.predicted_gap;
    let mut m = Map::new();
    m.insert("theorem".into(), json!(inst.kind.name()));
    m.insert("method".into(), json!(method.to_string()));
    m.insert("metric".into(), json!(inst.metric.to_string()));
    m.insert("distance".into(), json!(dist.to_string()));
    m.insert("expected_distance".into(), json!(inst.adjacency_distance));
    m.insert("realized_gap".into(), json!(realized.to_string()));
    m.insert("predicted_gap".into(), json!(inst.predicted_gap.to_string()));
    m.insert("idealized".into(), json!(inst.idealized.to_string()));
    m.insert("holds".into(), json!(holds));
    m.insert("adjacent".into(), json!(adjacent));
    Ok((m, holds && adjacent, inst.theorem().to_string(), method.to_string()))
}

// ---------------------------------------------------------------------------
// mechanisms

fn default_noise(f: ElementFormat) -> Noise {
    match f {
        ElementFormat::Float(_) => Noise::Laplace,
        ElementFormat::Int(i) if i.overflow() == Overflow::Wraparound => Noise::DiscreteLaplaceMod,
        ElementFormat::Int(_) => Noise::DiscreteLaplace,
    }
}

fn build_mechanism(mut sens: SensSpec, m: &MechanismArgs) -> CliResult<(MechanismSpec, Map<String, Value>)> {
    if let Some(s) = &m.method {
        sens.method = flag("method", s)?;
    }
    let epsilon = rational("epsilon", &m.epsilon)?;
    let noise = match &m.noise {
        Some(n) => flag("noise", n)?,
        None => default_noise(sens.format),
    };
    let cal = m.calibration.clone().unwrap_or_else(|| {
        if noise == Noise::DiscreteLaplaceMod { "modular" } else { "implemented" }.to_string()
    });
    let bound = match cal.as_str() {
        "idealized" => idealized_sensitivity(&sens),
        "implemented" => implemented_sensitivity_bound(&sens)?,
        "modular" => modular_sensitivity_bound(&sens)?,
        _ => {
            return input(format!(
                "calibration: unknown {cal:?} (expected idealized, implemented or modular)"
            ))
        }
    };
    let spec = match &m.scale {
        Some(s) => MechanismSpec::new(sens, noise, rational("scale", s)?, epsilon, bound)?,
        None => MechanismSpec::calibrated(sens, noise, epsilon, bound)?,
    };
    let p = params(&[
        ("format", Some(spec.sens.format.to_string())),
        ("metric", Some(spec.sens.metric.to_string())),
        ("method", Some(spec.sens.method.to_string())),
        ("epsilon", Some(rational_string(&spec.epsilon))),
        ("noise", Some(noise.name().to_string())),
        ("calibration", Some(cal)),
        ("scale", Some(rational_string(&spec.scale))),
    ]);
    Ok((spec, p))
}

fn mechanism_json(spec: &MechanismSpec) -> Value {
    json!({
        "noise": spec.noise.name(),
        "scale": rational_string(&spec.scale),
        "epsilon": rational_string(&spec.epsilon),
        "calibration": {
            "kind": spec.calibration.kind.name(),
            "value": spec.calibration.value.to_string(),
            "source": spec.calibration.source,
        },
        "scale_covers_calibration": spec.claims_dp(),
    })
}

pub fn experiment_run(a: &ExperimentArgs) -> CliResult<Outcome> {
    let inst = read_instance(&a.instance)?;
    let expect = match a.expect.as_deref() {
        None => None,
        Some("violation") => Some(Verdict::Violation),
        Some("consistent") => Some(Verdict::ConsistentWithEpsilon),
        Some(x) => return input(format!("expect: unknown {x:?} (expected violation or consistent)")),
    };
    let (body, mut p, citation, verdict) = match &inst {
        AnyInstance::Float(i) => experiment_typed(i, a)?,
        AnyInstance::Int(i) => experiment_typed(i, a)?,
    };
    p.insert("instance".into(), json!(a.instance.display().to_string()));
    p.insert("trials".into(), json!(a.trials.to_string()));
    let mut seeds = Map::new();
    seeds.insert("master".into(), json!(a.seed));
    seeds.insert(
        "per_trial".into(),
        json!("ChaCha20 seeded with master, stream 2*trial + side (0 = u, 1 = v), first u64"),
    );
    emit(&a.out, "experiment.json", &report("experiment_report", manifest("experiment run", p, seeds, vec![citation]), body))?;
    Ok(Outcome {
        passed: expect.is_none_or(|e| e == verdict),
    })
}

fn experiment_typed<T: CliElement>(
    inst: &AttackInstance<T>,
    a: &ExperimentArgs,
) -> CliResult<(Map<String, Value>, Map<String, Value>, String, Verdict)> {
    let (spec, p) = build_mechanism(instance_spec(inst)?, &a.mech)?;
    let threshold = a
        .threshold
        .as_ref()
        .map(|t| exact_value("threshold", spec.sens.format, t))
        .transpose()?;
    let r = distinguishing_experiment(inst, &spec, threshold, a.trials, a.seed)?;
    let bound = r.log2_probability_bound;
    let mut m = Map::new();
    m.insert("mechanism".into(), mechanism_json(&spec));
    m.insert("trials".into(), json!(r.trials));
    m.insert(
        "counts".into(),
        json!({
            "u": { "0": r.counts[0][0], "1": r.counts[0][1] },
            "v": { "0": r.counts[1][0], "1": r.counts[1][1] },
        }),
    );
    m.insert("threshold".into(), json!(r.threshold.to_string()));
    m.insert("log2_probability_bound".into(), if bound.is_finite() { json!(bound) } else { json!(format!("{bound}")) });
    m.insert("violation_level".into(), json!("0.01"));
    m.insert(
        "verdict".into(),
        json!(match r.verdict {
            Verdict::Violation => "violation",
            Verdict::ConsistentWithEpsilon => "consistent_with_epsilon",
        }),
    );
    Ok((m, p, inst.theorem().to_string(), r.verdict))
}

pub fn dpcheck_exact(a: &DpcheckArgs) -> CliResult<Outcome> {
    let (u, v, metric, citation) = match (&a.instance, &a.u, &a.v) {
        (Some(path), _, _) => match read_instance(path)? {
            AnyInstance::Int(i) => (i.u.clone(), i.v.clone(), i.metric, Some(i.theorem().to_string())),
            AnyInstance::Float(_) => return input("instance: exact check needs an integer format"),
        },
        (None, Some(pu), Some(pv)) => {
            let ints = |d: AnyDataset, name: &str| match d {
                AnyDataset::Int(d) => Ok(d),
                AnyDataset::Float(_) => input(format!("{name}: exact check needs an integer format")),
            };
            let du = ints(read_dataset(pu, "u")?, "u")?;
            let dv = ints(read_dataset(pv, "v")?, "v")?;
            (du, dv, flag::<Metric>("metric", &a.metric)?, None)
        }
        _ => return input("instance: give --instance or both --u and --v"),
    };
    if u.format() != v.format() || u.lower() != v.lower() || u.upper() != v.upper() {
        return input("v: format and bounds must match u");
    }
    let fmt = u.format();
    if let Some(m) = &a.m {
        let want: i128 = flag("m", m)?;
        if want != fmt.modulus() {
            return input(format!("m: {want} does not match the format {fmt} (modulus {})", fmt.modulus()));
        }
    }
    let sens = SensSpec::new(
        ElementFormat::Int(fmt),
        u.lower().to_exact(),
        u.upper().to_exact(),
        metric,
        Some(u.len().max(v.len())),
        a.mech.method.as_deref().map(|m| flag("method", m)).transpose()?.unwrap_or_else(SumMethod::iterative),
    )?;
    let (spec, mut p) = build_mechanism(sens, &a.mech)?;
    let check = exact_dp_check(&spec, &u, &v, &spec.epsilon)?;
    p.insert("m".into(), json!(fmt.modulus().to_string()));
    if let Some(i) = &a.instance {
        p.insert("instance".into(), json!(i.display().to_string()));
    }
    let mut body = Map::new();
    body.insert("mechanism".into(), mechanism_json(&spec));
    body.insert("max_ratio".into(), json!(rational_string(&check.max_ratio)));
    body.insert("ln_max_ratio".into(), json!(check.ln_max_ratio));
    body.insert("argmax".into(), json!(check.argmax.to_string()));
    body.insert("alpha".into(), json!(rational_string(&check.alpha)));
    body.insert("within_e_epsilon".into(), json!(check.within));
    let citations = citation.into_iter().chain([spec.calibration.source.clone()]).collect();
    emit(&a.out, "dpcheck.json", &report("dpcheck_exact", manifest("dpcheck exact", p, Map::new(), citations), body))?;
    Ok(Outcome { passed: check.within })
}
