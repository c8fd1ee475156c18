//! Run configuration: TOML or JSON documents with `[kernel]`, `[model]`,
//! `[numerics]` and per-command blocks.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use volterra_core::{Atom, ExponentTriple, InversionGrid, KernelSpec, ModelParams};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub Vec<String>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: {}", self.0.join("; "))
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBlock {
    /// `rough`, `power_law`, `constant` or `exp_sum`.
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// `[[weight, rate], ...]`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NumericsBlock {
    pub horizon: f64,
    pub steps: usize,
    /// Riccati formulation: `volterra`, `fractional`, `convolution` or `lift`.
    pub solver: String,
    /// Atoms of the lift when `solver = "lift"`.
    pub atoms: usize,
    pub x_max: f64,
    pub inversion_truncation: f64,
    pub inversion_step: f64,
}

impl Default for NumericsBlock {
    fn default() -> Self {
        let g = InversionGrid::default();
        Self {
            horizon: 1.0,
            steps: 500,
            solver: "volterra".into(),
            atoms: 200,
            x_max: 1e6,
            inversion_truncation: g.truncation,
            inversion_step: g.step,
        }
    }
}

/// Exponents as `"re,im"` strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformBlock {
    pub u: String,
    pub v: String,
    pub w: String,
}

impl Default for TransformBlock {
    fn default() -> Self {
        Self {
            u: "0,0".into(),
            v: "0,0".into(),
            w: "0,0".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriceBlock {
    pub strikes: Vec<f64>,
    /// `call` or `put`.
    pub kind: String,
}

impl Default for PriceBlock {
    fn default() -> Self {
        Self {
            strikes: vec![1.0],
            kind: "call".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateBlock {
    pub paths: usize,
    pub seed: u64,
    /// `volterra`, `ou` or `lift`.
    pub scheme: String,
    /// `summary` or `paths`.
    pub output: String,
    pub with_price: bool,
}

impl Default for SimulateBlock {
    fn default() -> Self {
        Self {
            paths: 10_000,
            seed: 1,
            scheme: "volterra".into(),
            output: "summary".into(),
            with_price: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiftBlock {
    pub atom_counts: Vec<usize>,
    /// Price exponent at which the lifted and Volterra `psi` are compared.
    pub u: String,
    /// Time steps of the Monte Carlo moment comparison.
    pub steps: usize,
    /// Monte Carlo paths for the moment comparison; 0 skips it.
    pub paths: usize,
    pub seed: u64,
}

impl Default for LiftBlock {
    fn default() -> Self {
        Self {
            atom_counts: vec![10, 50, 200],
            u: "0,2".into(),
            steps: 100,
            paths: 20_000,
            seed: 1,
        }
    }
}

/// A validated configuration. After [`parse_config`] every derived field is
/// filled in (`beta` rather than `theta`, both `a` and `sigma`), so the
/// serialised form parses back to the same value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub kernel: KernelBlock,
    #[serde(default)]
    pub model: ModelBlock,
    #[serde(default)]
    pub numerics: NumericsBlock,
    #[serde(default)]
    pub transform: TransformBlock,
    #[serde(default)]
    pub price: PriceBlock,
    #[serde(default)]
    pub simulate: SimulateBlock,
    #[serde(default)]
    pub lift: LiftBlock,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("kernel", &["type", "alpha", "scale", "c", "atoms"]),
    (
        "model",
        &[
            "lambda", "theta", "beta", "alpha0", "a", "sigma", "rho", "v0", "s0",
        ],
    ),
    (
        "numerics",
        &[
            "horizon",
            "steps",
            "solver",
            "atoms",
            "x_max",
            "inversion_truncation",
            "inversion_step",
        ],
    ),
    ("transform", &["u", "v", "w"]),
    ("price", &["strikes", "kind"]),
    (
        "simulate",
        &["paths", "seed", "scheme", "output", "with_price"],
    ),
    ("lift", &["atom_counts", "u", "steps", "paths", "seed"]),
];

/// Parse `re,im` or a plain real number.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |x: &str| {
        x.parse::<f64>()
            .map_err(|_| format!("cannot read {s:?} as re,im"))
    };
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err(format!("cannot read {s:?} as re,im")),
    }
}

pub fn format_complex(z: Complex64) -> String {
    format!("{},{}", z.re, z.im)
}

fn to_document(text: &str) -> Result<Value, ConfigError> {
    let trimmed = text.trim_start();
    let doc = if trimmed.starts_with('{') {
        serde_json::from_str::<Value>(text).map_err(|e| ConfigError(vec![format!("JSON: {e}")]))?
    } else {
        let t: toml::Table =
            toml::from_str(text).map_err(|e| ConfigError(vec![format!("TOML: {e}")]))?;
        serde_json::to_value(t).map_err(|e| ConfigError(vec![e.to_string()]))?
    };
    if !doc.is_object() {
        return Err(ConfigError(
            vec!["the configuration must be a table".into()],
        ));
    }
    Ok(doc)
}

const STRING_KEYS: &[&str] = &["type", "solver", "u", "v", "w", "kind", "scheme", "output"];

fn override_value(key: &str, raw: &str) -> Value {
    if !STRING_KEYS.contains(&key) {
        if let Ok(v) = serde_json::from_str::<Value>(raw) {
            return v;
        }
    }
    Value::String(raw.to_string())
}

/// Apply `section.key=value` overrides; values are read as JSON when they
/// parse as a number, boolean or array, and as strings otherwise.
fn apply_overrides(doc: &mut Value, overrides: &[String], errors: &mut Vec<String>) {
    for o in overrides {
        let Some((path, raw)) = o.split_once('=') else {
            errors.push(format!("override {o:?} is not section.key=value"));
            continue;
        };
        let Some((section, key)) = path.trim().split_once('.') else {
            errors.push(format!("override {o:?} is not section.key=value"));
            continue;
        };
        let root = doc.as_object_mut().expect("checked object");
        let entry = root
            .entry(section.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
        match entry.as_object_mut() {
            Some(table) => {
                table.insert(key.to_string(), override_value(key, raw.trim()));
            }
            None => errors.push(format!("[{section}] is not a table")),
        }
    }
}

fn unknown_keys(doc: &Value, errors: &mut Vec<String>) {
    let root = doc.as_object().expect("checked object");
    for (name, value) in root {
        if name == "schema" {
            continue;
        }
        let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| s == name) else {
            errors.push(format!("unknown section [{name}]"));
            continue;
        };
        let Some(table) = value.as_object() else {
            errors.push(format!("[{name}] must be a table"));
            continue;
        };
        for key in table.keys() {
            if !keys.contains(&key.as_str()) {
                errors.push(format!("unknown key {name}.{key}"));
            }
        }
    }
}

/// Parse and validate a configuration. Every problem found is reported.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, &[])
}

/// [`parse_config`] with `section.key=value` overrides applied first.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut doc = to_document(text)?;
    let mut errors = Vec::new();
    apply_overrides(&mut doc, overrides, &mut errors);
    unknown_keys(&doc, &mut errors);
    if let Some(root) = doc.as_object_mut() {
        root.remove("schema");
        for (name, _) in SECTIONS {
            if root.get(*name).is_some_and(|v| !v.is_object()) {
                root.remove(*name);
            }
        }
    }
    let cfg: RunConfig = match serde_json::from_value(doc) {
        Ok(c) => c,
        Err(e) => {
            errors.push(e.to_string());
            return Err(ConfigError(errors));
        }
    };
    let resolved = resolve(cfg, &mut errors);
    if errors.is_empty() {
        Ok(resolved)
    } else {
        Err(ConfigError(errors))
    }
}

fn resolve(mut cfg: RunConfig, errors: &mut Vec<String>) -> RunConfig {
    let m = &mut cfg.model;
    let lambda = m.lambda.unwrap_or(0.0);
    m.lambda = Some(lambda);
    match (m.beta, m.theta) {
        (Some(_), Some(_)) => errors.push("give exactly one of model.beta and model.theta".into()),
        (None, Some(th)) if lambda > 0.0 => {
            m.beta = Some(lambda * th);
            m.theta = None;
        }
        (None, Some(_)) => {
            errors.push("model.theta needs model.lambda > 0; give model.beta instead".into())
        }
        (None, None) if lambda > 0.0 => {
            errors.push("give one of model.beta and model.theta".into())
        }
        (None, None) => m.beta = Some(0.0),
        (Some(_), None) => {}
    }
    match (m.a, m.sigma) {
        (Some(a), Some(s)) => {
            if (a - s * s).abs() > 1e-12 * a.max(s * s).max(1.0) {
                errors.push(format!(
                    "model.a = {a} and model.sigma = {s} disagree: a must equal sigma^2"
                ));
            }
        }
        (None, Some(s)) => m.a = Some(s * s),
        (Some(a), None) => m.sigma = Some(a.max(0.0).sqrt()),
        (None, None) => {
            m.a = Some(0.0);
            m.sigma = Some(0.0);
        }
    }
    m.alpha0 = Some(m.alpha0.unwrap_or(0.0));
    m.rho = Some(m.rho.unwrap_or(0.0));
    m.s0 = Some(m.s0.unwrap_or(1.0));
    if m.v0.is_none() {
        errors.push("model.v0 is required".into());
    }
    if !(m.s0.unwrap() > 0.0) {
        errors.push(format!("model.s0 must be positive, got {}", m.s0.unwrap()));
    }
    if errors.is_empty() {
        if let Err(e) = cfg.model_params() {
            errors.push(e.to_string());
        }
    }

    if let Err(e) = cfg.kernel_spec() {
        errors.push(e);
    }
    let n = &cfg.numerics;
    if n.steps < 2 {
        errors.push("numerics.steps must be at least 2".into());
    }
    if !(n.horizon > 0.0) {
        errors.push(format!(
            "numerics.horizon must be positive, got {}",
            n.horizon
        ));
    }
    if !["volterra", "fractional", "convolution", "lift"].contains(&n.solver.as_str()) {
        errors.push(format!("unknown numerics.solver {:?}", n.solver));
    }
    let t = &mut cfg.transform;
    for (key, s) in [("u", &mut t.u), ("v", &mut t.v), ("w", &mut t.w)] {
        match parse_complex(s) {
            Ok(z) => *s = format_complex(z),
            Err(e) => errors.push(format!("transform.{key}: {e}")),
        }
    }
    match parse_complex(&cfg.lift.u) {
        Ok(z) => cfg.lift.u = format_complex(z),
        Err(e) => errors.push(format!("lift.u: {e}")),
    }
    if cfg.lift.atom_counts.is_empty() || cfg.lift.atom_counts.contains(&0) {
        errors.push("lift.atom_counts must be a non-empty list of positive counts".into());
    }
    if cfg.lift.steps < 2 {
        errors.push("lift.steps must be at least 2".into());
    }
    if cfg.simulate.paths == 0 {
        errors.push("simulate.paths must be positive".into());
    }
    if !["call", "put"].contains(&cfg.price.kind.as_str()) {
        errors.push(format!(
            "price.kind must be call or put, got {:?}",
            cfg.price.kind
        ));
    }
    if !["volterra", "ou", "lift"].contains(&cfg.simulate.scheme.as_str()) {
        errors.push(format!("unknown simulate.scheme {:?}", cfg.simulate.scheme));
    }
    if !["summary", "paths"].contains(&cfg.simulate.output.as_str()) {
        errors.push(format!(
            "simulate.output must be summary or paths, got {:?}",
            cfg.simulate.output
        ));
    }
    cfg
}

impl RunConfig {
    pub fn model_params(&self) -> volterra_core::Result<ModelParams> {
        let m = &self.model;
        let p = ModelParams {
            beta: m.beta.unwrap_or(0.0),
            lambda: m.lambda.unwrap_or(0.0),
            alpha0: m.alpha0.unwrap_or(0.0),
            a: m.a.unwrap_or(0.0),
            sigma: m.sigma.unwrap_or(0.0),
            rho: m.rho.unwrap_or(0.0),
            v0: m.v0.unwrap_or(0.0),
            l0: m.s0.unwrap_or(1.0).ln(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec, String> {
        let k = &self.kernel;
        let need = |x: Option<f64>, key: &str| {
            x.ok_or(format!("kernel.{key} is required for type {:?}", k.kind))
        };
        let spec = match k.kind.as_str() {
            "rough" => KernelSpec::rough(need(k.alpha, "alpha")?),
            "power_law" => KernelSpec::power_law(need(k.alpha, "alpha")?, k.scale.unwrap_or(1.0)),
            "constant" => Ok(KernelSpec::constant(k.c.unwrap_or(1.0))),
            "exp_sum" => {
                let atoms = k
                    .atoms
                    .as_ref()
                    .ok_or("kernel.atoms is required for type \"exp_sum\"")?;
                KernelSpec::exp_sum(atoms.iter().map(|a| Atom::new(a[0], a[1])).collect())
            }
            other => return Err(format!("unknown kernel.type {other:?}")),
        };
        spec.map_err(|e| e.to_string())
    }

    pub fn exponent(&self) -> ExponentTriple {
        let z = |s: &str| parse_complex(s).unwrap_or_default();
        ExponentTriple::new(
            z(&self.transform.u),
            z(&self.transform.v),
            z(&self.transform.w),
        )
    }

    pub fn inversion_grid(&self) -> InversionGrid {
        InversionGrid {
            truncation: self.numerics.inversion_truncation,
            step: self.numerics.inversion_step,
            ..InversionGrid::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HESTON: &str = r#"
[kernel]
type = "constant"

[model]
lambda = 2.0
theta = 0.04
sigma = 0.3
rho = -0.7
v0 = 0.04
"#;

    #[test]
    fn derives_beta_and_a() {
        let c = parse_config(HESTON).unwrap();
        assert!((c.model.beta.unwrap() - 0.08).abs() < 1e-15);
        assert_eq!(c.model.theta, None);
        assert!((c.model.a.unwrap() - 0.09).abs() < 1e-15);
        assert_eq!(c.kernel_spec().unwrap(), KernelSpec::constant(1.0));
    }

    #[test]
    fn consistent_a_and_sigma() {
        let text = HESTON.replace("sigma = 0.3", "sigma = 0.3\na = 0.09");
        assert!(parse_config(&text).is_ok());
        let bad = HESTON.replace("sigma = 0.3", "sigma = 0.3\na = 0.04");
        let e = parse_config(&bad).unwrap_err().to_string();
        assert!(e.contains("model.a") && e.contains("model.sigma"), "{e}");
    }

    #[test]
    fn reports_every_problem() {
        let text = HESTON.replace("v0 = 0.04", "beta = 0.1\nspeed = 3\n[extra]\nx = 1");
        let ConfigError(errs) = parse_config(&text).unwrap_err();
        let all = errs.join("\n");
        assert!(all.contains("model.speed"), "{all}");
        assert!(all.contains("[extra]"), "{all}");
        assert!(
            all.contains("exactly one of model.beta and model.theta"),
            "{all}"
        );
        assert!(all.contains("model.v0 is required"), "{all}");
    }

    #[test]
    fn json_round_trip() {
        let c = parse_config(HESTON).unwrap();
        let back = parse_config(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn overrides_win() {
        let c =
            parse_config_with(HESTON, &["model.v0=0.09".into(), "transform.u=0,2".into()]).unwrap();
        assert_eq!(c.model.v0, Some(0.09));
        assert_eq!(c.exponent().u, Complex64::new(0.0, 2.0));
    }

    #[test]
    fn complex_syntax() {
        assert_eq!(parse_complex("0.5, -3").unwrap(), Complex64::new(0.5, -3.0));
        assert_eq!(parse_complex("2").unwrap(), Complex64::new(2.0, 0.0));
        assert!(parse_complex("1,2,3").is_err());
    }
}
