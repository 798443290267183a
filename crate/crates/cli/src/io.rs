//! JSON file formats: datasets, attack instances, manifests.
//!
//! Exact numbers are strings. Float elements are hex bit patterns (`0x38`),
//! integers are decimal strings, exact values are `m*2^e`. A dataset's
//! `elements` array holds plain values or `{"value": ..., "count": n}` runs.

use std::fmt;
use std::path::{Path, PathBuf};

use boundsum::attacks::{AttackInstance, AttackKind};
use boundsum::mechanism::NoisyElement;
use boundsum::metrics::{Dataset, Metric};
use boundsum::sensitivity::{BruteElement, ElementFormat};
use boundsum::summation::SumMethod;
use boundsum::{DyadicRational, Element, KInt, SimFloat};
use num_rational::BigRational;
use serde_json::{json, Map, Value};

pub const SCHEMA: u64 = 1;

#[derive(Debug)]
pub enum CliError {
    /// Bad input or a violated precondition (exit 2).
    Input(String),
    Core(boundsum::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(s) => f.write_str(s),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<boundsum::Error> for CliError {
    fn from(e: boundsum::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn input<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Input(msg.into()))
}

/// Element types the command line handles.
pub trait CliElement: NoisyElement + BruteElement {
    fn wrap_dataset(ds: Dataset<Self>) -> AnyDataset;
    fn wrap_instance(inst: AttackInstance<Self>) -> AnyInstance;
    /// Bit pattern, or an exact value that the format represents.
    fn parse_value(fmt: Self::Format, s: &str) -> boundsum::Result<Self>;
}

impl CliElement for SimFloat {
    fn wrap_dataset(ds: Dataset<Self>) -> AnyDataset {
        AnyDataset::Float(ds)
    }

    fn wrap_instance(inst: AttackInstance<Self>) -> AnyInstance {
        AnyInstance::Float(inst)
    }

    fn parse_value(fmt: Self::Format, s: &str) -> boundsum::Result<Self> {
        let t = s.trim();
        if t.starts_with("0x") || t.starts_with("0X") {
            SimFloat::from_hex(fmt, t)
        } else {
            SimFloat::exact(fmt, &t.parse()?)
        }
    }
}

impl CliElement for KInt {
    fn wrap_dataset(ds: Dataset<Self>) -> AnyDataset {
        AnyDataset::Int(ds)
    }

    fn wrap_instance(inst: AttackInstance<Self>) -> AnyInstance {
        AnyInstance::Int(inst)
    }

    fn parse_value(fmt: Self::Format, s: &str) -> boundsum::Result<Self> {
        KInt::decode(fmt, s)
    }
}

#[derive(Clone, Debug)]
pub enum AnyDataset {
    Float(Dataset<SimFloat>),
    Int(Dataset<KInt>),
}

impl AnyDataset {
    pub fn format(&self) -> ElementFormat {
        match self {
            AnyDataset::Float(d) => ElementFormat::Float(d.format()),
            AnyDataset::Int(d) => ElementFormat::Int(d.format()),
        }
    }

    pub fn len(&self) -> u64 {
        match self {
            AnyDataset::Float(d) => d.len(),
            AnyDataset::Int(d) => d.len(),
        }
    }

    pub fn bounds(&self) -> (DyadicRational, DyadicRational) {
        fn b<T: Element>(d: &Dataset<T>) -> (DyadicRational, DyadicRational) {
            (
                d.lower().to_exact().expect("finite bound"),
                d.upper().to_exact().expect("finite bound"),
            )
        }
        match self {
            AnyDataset::Float(d) => b(d),
            AnyDataset::Int(d) => b(d),
        }
    }
}

#[derive(Clone, Debug)]
pub enum AnyInstance {
    Float(AttackInstance<SimFloat>),
    Int(AttackInstance<KInt>),
}

// ---------------------------------------------------------------------------
// Writing.

pub fn dataset_json<T: Element>(fmt: ElementFormat, ds: &Dataset<T>) -> Value {
    let elements: Vec<Value> = ds
        .runs()
        .iter()
        .map(|r| {
            if r.count == 1 {
                Value::String(r.value.encode())
            } else {
                json!({ "value": r.value.encode(), "count": r.count })
            }
        })
        .collect();
    json!({
        "schema": SCHEMA,
        "kind": "dataset",
        "format": fmt.to_string(),
        "lower": ds.lower().encode(),
        "upper": ds.upper().encode(),
        "length": ds.len(),
        "elements": elements,
    })
}

pub fn rational_string(q: &BigRational) -> String {
    if q.denom() == &1.into() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn instance_json<T: Element>(fmt: ElementFormat, inst: &AttackInstance<T>, u: &str, v: &str) -> Value {
    let params: Map<String, Value> = inst.params.iter().map(|(k, x)| (k.clone(), json!(x))).collect();
    json!({
        "schema": SCHEMA,
        "kind": "attack_instance",
        "theorem": inst.kind.name(),
        "citation": inst.theorem(),
        "format": fmt.to_string(),
        "metric": inst.metric.to_string(),
        "adjacency_distance": inst.adjacency_distance,
        "predicted_gap": inst.predicted_gap.to_string(),
        "idealized": inst.idealized.to_string(),
        "blowup": rational_string(&inst.blowup),
        "native_method": inst.native.to_string(),
        "params": params,
        "u": u,
        "v": v,
    })
}

/// Pretty JSON with a trailing newline.
pub fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, v: &Value) -> CliResult<()> {
    std::fs::write(path, render(v))
        .map_err(|e| CliError::Input(format!("out: cannot write {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Reading.

fn read_json(path: &Path, flag: &str) -> CliResult<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{flag}: cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: not valid JSON: {e}", path.display())))
}

/// Field accessors that name the file and field in their errors.
struct Obj<'a> {
    file: String,
    map: &'a Map<String, Value>,
}

impl<'a> Obj<'a> {
    fn new(path: &Path, v: &'a Value) -> CliResult<Self> {
        let file = path.display().to_string();
        match v.as_object() {
            Some(map) => Ok(Obj { file, map }),
            None => input(format!("{file}: expected a JSON object at the top level")),
        }
    }

    fn err<T>(&self, field: &str, msg: impl fmt::Display) -> CliResult<T> {
        input(format!("{}: field `{field}`: {msg}", self.file))
    }

    fn get(&self, field: &str) -> CliResult<&'a Value> {
        match self.map.get(field) {
            Some(v) => Ok(v),
            None => self.err(field, "missing"),
        }
    }

    fn str(&self, field: &str) -> CliResult<&'a str> {
        match self.get(field)?.as_str() {
            Some(s) => Ok(s),
            None => self.err(field, "expected a string"),
        }
    }

    fn u64(&self, field: &str) -> CliResult<u64> {
        match count_value(self.get(field)?) {
            Some(n) => Ok(n),
            None => self.err(field, "expected a non-negative integer"),
        }
    }

    fn parsed<T: std::str::FromStr>(&self, field: &str) -> CliResult<T>
    where
        T::Err: fmt::Display,
    {
        let s = self.str(field)?;
        s.parse().or_else(|e| self.err(field, e))
    }

    fn schema(&self, kind: &str) -> CliResult<()> {
        match self.map.get("schema").and_then(Value::as_u64) {
            Some(SCHEMA) => {}
            Some(n) => return self.err("schema", format!("unsupported version {n}, expected {SCHEMA}")),
            None => return self.err("schema", format!("missing or not an integer, expected {SCHEMA}")),
        }
        if let Some(k) = self.map.get("kind") {
            if k.as_str() != Some(kind) {
                return self.err("kind", format!("expected \"{kind}\", got {k}"));
            }
        }
        Ok(())
    }
}

fn count_value(v: &Value) -> Option<u64> {
    match v {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

pub fn read_dataset(path: &Path, flag: &str) -> CliResult<AnyDataset> {
    let v = read_json(path, flag)?;
    let o = Obj::new(path, &v)?;
    o.schema("dataset")?;
    let fmt: ElementFormat = o.parsed("format")?;
    match fmt {
        ElementFormat::Float(f) => parse_elements::<SimFloat>(&o, f),
        ElementFormat::Int(f) => parse_elements::<KInt>(&o, f),
    }
}

fn parse_elements<T: CliElement>(o: &Obj, fmt: T::Format) -> CliResult<AnyDataset> {
    let bound = |field: &str| -> CliResult<T> {
        let s = o.str(field)?;
        T::parse_value(fmt, s).or_else(|e| o.err(field, e))
    };
    let (lo, hi) = (bound("lower")?, bound("upper")?);
    let mut ds = Dataset::empty(lo, hi).or_else(|e| o.err("lower", e))?;
    let Some(items) = o.get("elements")?.as_array() else {
        return o.err("elements", "expected an array");
    };
    for (i, item) in items.iter().enumerate() {
        let at = format!("elements[{i}]");
        let (s, count) = match item {
            Value::String(s) => (s.as_str(), 1),
            Value::Object(m) => {
                let s = match m.get("value").and_then(Value::as_str) {
                    Some(s) => s,
                    None => return o.err(&format!("{at}.value"), "expected a string"),
                };
                let c = match m.get("count").and_then(count_value) {
                    Some(c) => c,
                    None => return o.err(&format!("{at}.count"), "expected a non-negative integer"),
                };
                (s, c)
            }
            _ => return o.err(&at, "expected a string or a {value, count} object"),
        };
        let x = T::parse_value(fmt, s).or_else(|e| o.err(&at, e))?;
        ds.push_run(x, count).or_else(|e| o.err(&at, e))?;
    }
    if let Some(len) = o.map.get("length") {
        if count_value(len) != Some(ds.len()) {
            return o.err("length", format!("says {len} but the elements hold {}", ds.len()));
        }
    }
    Ok(T::wrap_dataset(ds))
}

/// An instance file and the dataset files it points to.
pub fn read_instance(path: &Path) -> CliResult<AnyInstance> {
    let v = read_json(path, "instance")?;
    let o = Obj::new(path, &v)?;
    o.schema("attack_instance")?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let resolve = |field: &str| -> CliResult<PathBuf> { Ok(dir.join(o.str(field)?)) };
    let u = read_dataset(&resolve("u")?, "u")?;
    let v = read_dataset(&resolve("v")?, "v")?;
    let fmt: ElementFormat = o.parsed("format")?;
    if u.format() != fmt || v.format() != fmt {
        return o.err("format", format!("{fmt} does not match the dataset files ({}, {})", u.format(), v.format()));
    }
    let params = match o.get("params")?.as_object() {
        Some(m) => m
            .iter()
            .map(|(k, x)| match x.as_i64() {
                Some(n) => Ok((k.clone(), n)),
                None => o.err(&format!("params.{k}"), "expected an integer"),
            })
            .collect::<CliResult<Vec<_>>>()?,
        None => return o.err("params", "expected an object"),
    };
    let kind: AttackKind = o.parsed("theorem")?;
    let metric: Metric = o.parsed("metric")?;
    let adjacency_distance = o.u64("adjacency_distance")?;
    let predicted_gap: DyadicRational = o.parsed("predicted_gap")?;
    let idealized: DyadicRational = o.parsed("idealized")?;
    let blowup = match boundsum::numeric::parse_decimal(o.str("blowup")?) {
        Some(q) => q,
        None => return o.err("blowup", "expected an exact rational such as \"16\" or \"33/2\""),
    };
    let native: SumMethod = o.parsed("native_method")?;
    fn build<T: CliElement>(
        u: Dataset<T>,
        v: Dataset<T>,
        kind: AttackKind,
        metric: Metric,
        adjacency_distance: u64,
        predicted_gap: DyadicRational,
        idealized: DyadicRational,
        blowup: BigRational,
        native: SumMethod,
        params: Vec<(String, i64)>,
    ) -> AnyInstance {
        T::wrap_instance(AttackInstance {
            kind,
            u,
            v,
            metric,
            adjacency_distance,
            predicted_gap,
            idealized,
            blowup,
            native,
            params,
        })
    }
    Ok(match (u, v) {
        (AnyDataset::Float(u), AnyDataset::Float(v)) => build(
            u, v, kind, metric, adjacency_distance, predicted_gap, idealized, blowup, native, params,
        ),
        (AnyDataset::Int(u), AnyDataset::Int(v)) => build(
            u, v, kind, metric, adjacency_distance, predicted_gap, idealized, blowup, native, params,
        ),
        _ => unreachable!("formats checked above"),
    })
}
