//! Strict JSON experiment configuration.
//!
//! Parsing is two-pass: the document is first walked against a static schema
//! so that every problem (unknown key, wrong type, out-of-range value,
//! conflicting options) is collected with its field path, and only a clean
//! document is handed to serde.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use subquantum::walker::Scheme;
use subquantum::{BathParams, OscillatorParams, SpinSign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Bouncer,
    Walker,
    Balance,
    Spectrum,
    Spinfield,
}

impl Experiment {
    pub const ALL: [Experiment; 5] =
        [Experiment::Bouncer, Experiment::Walker, Experiment::Balance, Experiment::Spectrum, Experiment::Spinfield];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Bouncer => "bouncer",
            Experiment::Walker => "walker",
            Experiment::Balance => "balance",
            Experiment::Spectrum => "spectrum",
            Experiment::Spinfield => "spinfield",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Worker pool size: `"auto"` (one per core) or a fixed count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Threads {
    #[default]
    Auto,
    Count(usize),
}

impl FromStr for Threads {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Threads::Auto);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Threads::Count(n)),
            _ => Err(format!("expected \"auto\" or a positive integer, got `{s}`")),
        }
    }
}

impl Serialize for Threads {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Threads::Auto => s.serialize_str("auto"),
            Threads::Count(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Threads {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            Value::Number(n) => match n.as_u64() {
                Some(k) if k >= 1 => Ok(Threads::Count(k as usize)),
                _ => Err(serde::de::Error::custom("thread count must be a positive integer")),
            },
            _ => Err(serde::de::Error::custom("expected \"auto\" or a positive integer")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriveKind {
    Linear,
    Uniform,
    Circular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Initial {
    Rest,
    SteadyState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogTimes {
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
}

/// Numerical settings. Unset fields take per-experiment defaults, listed in
/// the README.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_periods: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_times: Option<LogTimes>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<Initial>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples_per_period: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_shape: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_spacing: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spin_sign: Option<SpinSign>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spin_u_dir: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spin_v_dir: Option<[f64; 3]>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub oscillator: OscillatorParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bath: Option<BathParams>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub root_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub threads: Threads,
}

impl ExperimentConfig {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// One schema violation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}`: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{} schema violation(s):\n{}", .0.len(), .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Schema(Vec<Issue>),
    #[error("{0}")]
    Io(String),
}

impl ConfigError {
    pub fn issues(&self) -> &[Issue] {
        match self {
            ConfigError::Schema(v) => v,
            _ => &[],
        }
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Positive,
    NonNegative,
    Finite,
    Count(u64),
    Seed,
    OneOf(&'static [&'static str]),
    Text,
    Threads,
    Vector3,
    Counts(u64),
    Positives,
    Object(&'static [Field]),
}

struct Field {
    key: &'static str,
    kind: Kind,
    required: bool,
}

const fn req(key: &'static str, kind: Kind) -> Field {
    Field { key, kind, required: true }
}

const fn opt(key: &'static str, kind: Kind) -> Field {
    Field { key, kind, required: false }
}

const EXPERIMENTS: &[&str] = &["bouncer", "walker", "balance", "spectrum", "spinfield"];

const OSCILLATOR: &[Field] = &[
    req("m", Kind::Positive),
    req("omega0", Kind::Positive),
    req("gamma", Kind::NonNegative),
    req("F0", Kind::NonNegative),
    opt("dims", Kind::Count(1)),
];

const BATH: &[Field] = &[req("kT0", Kind::NonNegative), req("zeta", Kind::Positive)];

const LOG_TIMES: &[Field] = &[req("t_min", Kind::Positive), req("t_max", Kind::Positive), req("count", Kind::Count(2))];

const NUMERICS: &[Field] = &[
    opt("dt", Kind::Positive),
    opt("steps", Kind::Count(1)),
    opt("M", Kind::Count(1)),
    opt("record_stride", Kind::Count(1)),
    opt("n_periods", Kind::Count(1)),
    opt("log_times", Kind::Object(LOG_TIMES)),
    opt("scheme", Kind::OneOf(&["exact-ou", "euler-maruyama"])),
    opt("drive", Kind::OneOf(&["linear", "uniform", "circular"])),
    opt("omega", Kind::Positive),
    opt("initial", Kind::OneOf(&["rest", "steady-state"])),
    opt("samples_per_period", Kind::Count(16)),
    opt("n_max", Kind::Count(0)),
    opt("grid_shape", Kind::Counts(5)),
    opt("grid_spacing", Kind::Positives),
    opt("sigma", Kind::Positive),
    opt("alpha", Kind::Finite),
    opt("spin_sign", Kind::OneOf(&["+", "-"])),
    opt("spin_u_dir", Kind::Vector3),
    opt("spin_v_dir", Kind::Vector3),
];

const TOP: &[Field] = &[
    req("experiment", Kind::OneOf(EXPERIMENTS)),
    req("oscillator", Kind::Object(OSCILLATOR)),
    opt("bath", Kind::Object(BATH)),
    opt("numerics", Kind::Object(NUMERICS)),
    opt("root_seed", Kind::Seed),
    opt("output_dir", Kind::Text),
    opt("threads", Kind::Threads),
];

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn closest(key: &str, fields: &[Field]) -> Option<&'static str> {
    fields
        .iter()
        .map(|f| (strsim::jaro_winkler(&key.to_lowercase(), &f.key.to_lowercase()), f.key))
        .filter(|(score, _)| *score >= 0.75)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, k)| k)
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

fn check_count(v: &Value, min: u64) -> Result<(), String> {
    match v.as_u64() {
        Some(n) if n >= min => Ok(()),
        Some(n) => Err(format!("must be an integer >= {min}, got {n}")),
        None => Err(format!("must be an integer >= {min}, got {v}")),
    }
}

fn check_value(v: &Value, kind: Kind, path: &str, issues: &mut Vec<Issue>) {
    let mut fail = |message: String| issues.push(Issue { path: path.to_string(), message });
    match kind {
        Kind::Positive | Kind::NonNegative | Kind::Finite => match v.as_f64() {
            None => fail(format!("must be a number, got {}", type_name(v))),
            Some(x) if matches!(kind, Kind::Positive) && x <= 0.0 => fail(format!("must be > 0, got {x}")),
            Some(x) if matches!(kind, Kind::NonNegative) && x < 0.0 => fail(format!("must be >= 0, got {x}")),
            Some(_) => {}
        },
        Kind::Count(min) => {
            if let Err(m) = check_count(v, min) {
                fail(m)
            }
        }
        Kind::Seed => {
            if v.as_u64().is_none() {
                fail(format!("must be an integer in [0, 2^64), got {v}"))
            }
        }
        Kind::OneOf(options) => match v.as_str() {
            Some(s) if options.contains(&s) => {}
            Some(s) => {
                let hint = options
                    .iter()
                    .map(|o| (strsim::jaro_winkler(s, o), *o))
                    .filter(|(score, _)| *score >= 0.75)
                    .max_by(|a, b| a.0.total_cmp(&b.0))
                    .map(|(_, o)| format!(" (did you mean `{o}`?)"))
                    .unwrap_or_default();
                fail(format!("unknown value `{s}`, expected one of {}{hint}", options.join(", ")))
            }
            None => fail(format!("must be a string, got {}", type_name(v))),
        },
        Kind::Text => match v.as_str() {
            Some(s) if !s.is_empty() => {}
            _ => fail("must be a non-empty string".into()),
        },
        Kind::Threads => {
            let ok = match v {
                Value::String(s) => s == "auto",
                Value::Number(n) => n.as_u64().is_some_and(|k| k >= 1),
                _ => false,
            };
            if !ok {
                fail(format!("must be \"auto\" or a positive integer, got {v}"))
            }
        }
        Kind::Vector3 => match v.as_array() {
            Some(a) if a.len() == 3 && a.iter().all(|x| x.as_f64().is_some()) => {}
            _ => fail("must be an array of 3 numbers".into()),
        },
        Kind::Counts(min) => match v.as_array() {
            Some(a) if (1..=3).contains(&a.len()) => {
                for (i, x) in a.iter().enumerate() {
                    if let Err(m) = check_count(x, min) {
                        issues.push(Issue { path: format!("{path}[{i}]"), message: m });
                    }
                }
            }
            _ => fail("must be an array of 1 to 3 integers".into()),
        },
        Kind::Positives => match v.as_array() {
            Some(a) if (1..=3).contains(&a.len()) => {
                for (i, x) in a.iter().enumerate() {
                    if !x.as_f64().is_some_and(|h| h > 0.0) {
                        issues.push(Issue { path: format!("{path}[{i}]"), message: format!("must be > 0, got {x}") });
                    }
                }
            }
            _ => fail("must be an array of 1 to 3 positive numbers".into()),
        },
        Kind::Object(fields) => match v.as_object() {
            Some(obj) => check_object(obj, fields, path, issues),
            None => fail(format!("must be an object, got {}", type_name(v))),
        },
    }
}

fn check_object(obj: &Map<String, Value>, fields: &[Field], path: &str, issues: &mut Vec<Issue>) {
    for (key, value) in obj {
        match fields.iter().find(|f| f.key == key) {
            Some(f) => check_value(value, f.kind, &join(path, key), issues),
            None => {
                let hint = closest(key, fields).map(|k| format!("; did you mean `{k}`?")).unwrap_or_default();
                issues.push(Issue { path: join(path, key), message: format!("unknown key{hint}") });
            }
        }
    }
    for f in fields.iter().filter(|f| f.required) {
        if !obj.contains_key(f.key) {
            issues.push(Issue { path: join(path, f.key), message: "missing required key".into() });
        }
    }
}

fn get<'a>(v: &'a Value, path: &[&str]) -> Option<&'a Value> {
    path.iter().try_fold(v, |v, k| v.get(k))
}

/// Constraints that span several fields or depend on the experiment.
fn check_consistency(doc: &Value, issues: &mut Vec<Issue>) {
    let mut push = |path: &str, message: &str| issues.push(Issue { path: path.into(), message: message.into() });
    let experiment = doc.get("experiment").and_then(Value::as_str).unwrap_or("");
    let num = |k: &str| get(doc, &["numerics", k]);
    let f64_at = |p: &[&str]| get(doc, p).and_then(Value::as_f64);

    if matches!(experiment, "walker" | "balance") && doc.get("bath").is_none() {
        push("bath", &format!("required for the {experiment} experiment"));
    }
    if experiment != "walker" && f64_at(&["oscillator", "gamma"]) == Some(0.0) {
        push(
            "oscillator.gamma",
            &format!("must be > 0 for the {experiment} experiment (hbar = m r^2 omega0 needs finite r)"),
        );
    }
    if matches!(experiment, "balance" | "spectrum" | "spinfield") && f64_at(&["oscillator", "F0"]) == Some(0.0) {
        push("oscillator.F0", &format!("must be > 0 for the {experiment} experiment (hbar would vanish)"));
    }
    if experiment == "balance" && f64_at(&["bath", "kT0"]) == Some(0.0) {
        push("bath.kT0", "must be > 0 for the balance experiment");
    }

    if let Some(lt) = num("log_times") {
        for k in ["dt", "steps", "record_stride"] {
            if num(k).is_some() {
                push(&format!("numerics.{k}"), "conflicts with numerics.log_times; choose one schedule");
            }
        }
        if num("scheme").and_then(Value::as_str) == Some("euler-maruyama") {
            push("numerics.log_times", "explicit record times need the exact-ou scheme");
        }
        if let (Some(a), Some(b)) = (lt.get("t_min").and_then(Value::as_f64), lt.get("t_max").and_then(Value::as_f64)) {
            if b <= a {
                push("numerics.log_times.t_max", "must exceed t_min");
            }
        }
    }

    if num("drive").and_then(Value::as_str) == Some("circular") {
        if get(doc, &["oscillator", "dims"]).and_then(Value::as_u64).unwrap_or(1) < 2 {
            push("numerics.drive", "circular drive needs oscillator.dims >= 2");
        }
        if num("omega").is_some() {
            push("numerics.omega", "circular drive runs at omega0; omit omega");
        }
    }

    let shape = num("grid_shape").and_then(Value::as_array).map(Vec::len);
    let spacing = num("grid_spacing").and_then(Value::as_array).map(Vec::len);
    if let (Some(a), Some(b)) = (shape, spacing) {
        if a != b {
            push("numerics.grid_spacing", &format!("has {b} entries but grid_shape has {a}"));
        }
    }
    if experiment == "spinfield" {
        if let Some(n) = shape.or(spacing) {
            if n < 2 {
                push(
                    if shape.is_some() { "numerics.grid_shape" } else { "numerics.grid_spacing" },
                    "spin fields need a 2-D or 3-D grid",
                );
            }
        }
    }

    let dir =
        |k: &str| num(k).and_then(Value::as_array).map(|a| a.iter().filter_map(Value::as_f64).collect::<Vec<_>>());
    let unit = |v: &[f64]| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        (v.len() == 3 && n > 0.0).then(|| [v[0] / n, v[1] / n, v[2] / n])
    };
    let (u, v) = (dir("spin_u_dir"), dir("spin_v_dir"));
    for (k, d) in [("spin_u_dir", &u), ("spin_v_dir", &v)] {
        if let Some(d) = d {
            if d.len() == 3 && unit(d).is_none() {
                push(&format!("numerics.{k}"), "must be a non-zero vector");
            }
        }
    }
    let default_u = vec![1.0, 0.0, 0.0];
    let default_v = vec![0.0, 0.0, 1.0];
    let (u, v) = (u.unwrap_or(default_u), v.unwrap_or(default_v));
    if let (Some(a), Some(b)) = (unit(&u), unit(&v)) {
        let c = subquantum::spinfield::norm(subquantum::spinfield::cross(a, b));
        if c <= subquantum::spinfield::PARALLEL_TOLERANCE.sin() {
            push("numerics.spin_v_dir", "is parallel to spin_u_dir; the spin direction is undefined");
        }
    }
}

/// Parse and validate a configuration, reporting every violation.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let Some(obj) = doc.as_object() else {
        return Err(ConfigError::Schema(vec![Issue {
            path: "$".into(),
            message: format!("top level must be an object, got {}", type_name(&doc)),
        }]));
    };
    let mut issues = Vec::new();
    check_object(obj, TOP, "", &mut issues);
    check_consistency(&doc, &mut issues);
    if !issues.is_empty() {
        return Err(ConfigError::Schema(issues));
    }
    let cfg: ExperimentConfig = serde_json::from_value(doc)
        .map_err(|e| ConfigError::Schema(vec![Issue { path: "$".into(), message: e.to_string() }]))?;
    // final guard: the library's own parameter checks
    let mut issues = Vec::new();
    if let Err(e) = cfg.oscillator.validate() {
        issues.push(Issue { path: "oscillator".into(), message: e.to_string() });
    }
    if let Some(Err(e)) = cfg.bath.map(|b| b.validate()) {
        issues.push(Issue { path: "bath".into(), message: e.to_string() });
    }
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Schema(issues))
    }
}

pub const PRESETS: &[(&str, &str)] = &[
    ("sec2-bouncer", include_str!("../presets/sec2-bouncer.json")),
    ("sec3-walker", include_str!("../presets/sec3-walker.json")),
    ("sec4-balance", include_str!("../presets/sec4-balance.json")),
    ("sec5-spectrum", include_str!("../presets/sec5-spectrum.json")),
    ("sec6-spin", include_str!("../presets/sec6-spin.json")),
];

pub fn preset(name: &str) -> Result<ExperimentConfig, ConfigError> {
    match PRESETS.iter().find(|(n, _)| *n == name) {
        Some((_, text)) => parse_config(text),
        None => {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
            let hint = names
                .iter()
                .map(|n| (strsim::jaro_winkler(name, n), *n))
                .filter(|(s, _)| *s >= 0.75)
                .max_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, n)| format!("; did you mean `{n}`?"))
                .unwrap_or_default();
            Err(ConfigError::Schema(vec![Issue {
                path: "preset".into(),
                message: format!("unknown preset `{name}`, expected one of {}{hint}", names.join(", ")),
            }]))
        }
    }
}
