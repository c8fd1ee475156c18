//! Library behind the `volterra` binary: configuration parsing and the six
//! commands, each producing a JSON report or a CSV table.

pub mod config;

use std::fmt::Write as _;

use num_complex::Complex64;
use serde_json::{json, Value};
use volterra_core::{
    cf_general, cf_lift_general, cf_rough_heston, discretize_measure, implied_vol, mc_transform,
    measure_of, resolvent_analytic, resolvent_numeric, resolvent_table_analytic,
    simulate_lift_with, simulate_volterra_ou, simulate_volterra_with, solve_convolution_riccati,
    solve_fractional_riccati, solve_lift_transform, solve_riccati_volterra, Atom, Error,
    ExponentTriple, FourierPricer, KernelSpec, ModelParams, OptionKind, PathSet, SimConfig,
    TransformValue,
};

pub use config::{parse_config, parse_config_with, ConfigError, RunConfig};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Resolvent,
    Riccati,
    Cf,
    Price,
    Simulate,
    LiftCompare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Resolvent => "resolvent",
            Command::Riccati => "riccati",
            Command::Cf => "cf",
            Command::Price => "price",
            Command::Simulate => "simulate",
            Command::LiftCompare => "lift-compare",
        }
    }

    /// CSV for the tabular commands, JSON for the rest.
    pub fn default_format(self) -> Format {
        match self {
            Command::Resolvent | Command::Riccati | Command::Simulate => Format::Csv,
            _ => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Solver(Error),
}

impl RunError {
    /// 2 for bad input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Solver(e) if e.is_validation() => 2,
            RunError::Solver(_) => 3,
        }
    }

    pub fn to_json(&self) -> Value {
        let error = match self {
            RunError::Config(ConfigError(list)) => json!({"kind": "config", "errors": list}),
            RunError::Solver(e) => {
                let mut v = serde_json::to_value(e).unwrap_or_else(|_| json!({}));
                if let Some(obj) = v.as_object_mut() {
                    obj.insert("message".into(), json!(e.to_string()));
                }
                v
            }
        };
        json!({"schema": SCHEMA, "exit_code": self.exit_code(), "error": error})
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => e.fmt(f),
            RunError::Solver(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Solver(e)
    }
}

fn invalid(msg: impl Into<String>) -> RunError {
    RunError::Config(ConfigError(vec![msg.into()]))
}

/// Rows of a CSV table; numbers are written with full round-trip precision.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Value>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| match v {
                    Value::String(s) => s.clone(),
                    Value::Null => String::new(),
                    other => other.to_string(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj: serde_json::Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(r)
                    .map(|(c, v)| (c.to_string(), v.clone()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }
}

/// Output of one command before serialisation.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: Command,
    pub config: RunConfig,
    /// Scalars and diagnostics.
    pub summary: Value,
    pub table: Table,
}

impl Report {
    /// `{"schema": 1, "command", "config", "result"}`; `result` holds the
    /// summary fields plus the table under `rows`.
    pub fn to_json(&self) -> Value {
        let mut result = self.summary.clone();
        if let Some(obj) = result.as_object_mut() {
            obj.insert("rows".into(), self.table.to_json());
        }
        json!({
            "schema": SCHEMA,
            "command": self.command.name(),
            "config": self.config,
            "result": result,
        })
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s =
                    serde_json::to_string_pretty(&self.to_json()).expect("finite JSON tree");
                s.push('\n');
                s
            }
            Format::Csv => self.table.to_csv(),
        }
    }
}

/// Floats that JSON cannot hold (`inf` at a singular kernel's origin) become null.
fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Report, RunError> {
    let k = cfg.kernel_spec().map_err(invalid)?;
    let m = cfg.model_params()?;
    let (summary, table) = match command {
        Command::Resolvent => resolvent(cfg, &k, &m)?,
        Command::Riccati => riccati(cfg, &k, &m)?,
        Command::Cf => cf(cfg, &k, &m)?,
        Command::Price => price(cfg, &k, &m)?,
        Command::Simulate => simulate(cfg, &k, &m)?,
        Command::LiftCompare => lift_compare(cfg, &k, &m)?,
    };
    Ok(Report {
        command,
        config: cfg.clone(),
        summary,
        table,
    })
}

fn lift_atoms(cfg: &RunConfig, k: &KernelSpec, count: usize) -> Result<Vec<Atom>, RunError> {
    if let KernelSpec::ExponentialSum { atoms } = k {
        return Ok(atoms.clone());
    }
    Ok(discretize_measure(
        &measure_of(k)?,
        count,
        cfg.numerics.x_max,
    )?)
}

fn rough_alpha(k: &KernelSpec, solver: &str) -> Result<f64, RunError> {
    match *k {
        KernelSpec::PowerLaw { alpha, scale: 1.0 } => Ok(alpha),
        _ => Err(invalid(format!(
            "numerics.solver = {solver:?} needs kernel.type = \"rough\" (or power_law with scale 1)"
        ))),
    }
}

fn price_only(e: &ExponentTriple, solver: &str) -> Result<Complex64, RunError> {
    if e.v != Complex64::default() || e.w != Complex64::default() {
        return Err(invalid(format!(
            "numerics.solver = {solver:?} handles transform.u only; set transform.v and transform.w to 0"
        )));
    }
    Ok(e.u)
}

fn resolvent(cfg: &RunConfig, k: &KernelSpec, m: &ModelParams) -> Result<(Value, Table), RunError> {
    let n = &cfg.numerics;
    let tbl = if resolvent_analytic(k, m.lambda).is_some() {
        resolvent_table_analytic(k, m.lambda, n.horizon, n.steps)?
    } else {
        resolvent_numeric(k, m.lambda, n.horizon, n.steps)?
    };
    let mut t = Table::new(&["t", "r", "int_r"]);
    for (j, (r, c)) in tbl.samples.iter().zip(&tbl.cumulative).enumerate() {
        t.push(vec![num(tbl.grid.t(j)), num(*r), num(*c)]);
    }
    let summary = json!({
        "lambda": m.lambda,
        "method": tbl.method,
        "residual": num(tbl.residual),
    });
    Ok((summary, t))
}

fn riccati(cfg: &RunConfig, k: &KernelSpec, m: &ModelParams) -> Result<(Value, Table), RunError> {
    let n = &cfg.numerics;
    let e = cfg.exponent();
    let (times, psi, residual, warnings): (Vec<f64>, Vec<Complex64>, Option<f64>, Vec<String>) =
        match n.solver.as_str() {
            "volterra" => {
                let s = solve_riccati_volterra(k, m, &e, n.horizon, n.steps)?;
                (s.grid.times(), s.psi, Some(s.residual), s.warnings)
            }
            "fractional" => {
                let u = price_only(&e, "fractional")?;
                let s = solve_fractional_riccati(
                    rough_alpha(k, "fractional")?,
                    m,
                    u,
                    n.horizon,
                    n.steps,
                )?;
                (s.grid.times(), s.psi, Some(s.residual), s.warnings)
            }
            "convolution" => {
                let u = price_only(&e, "convolution")?;
                let s = solve_convolution_riccati(k, m, u, n.horizon, n.steps)?;
                (
                    s.grid.times(),
                    s.psi,
                    Some(s.certificate),
                    e.domain_warnings(),
                )
            }
            _ => {
                let atoms = lift_atoms(cfg, k, n.atoms)?;
                let s = solve_lift_transform(&atoms, m, &e, n.horizon, n.steps)?;
                (s.grid.times(), s.psi_reduced, None, e.domain_warnings())
            }
        };
    let mut t = Table::new(&["t", "psi_re", "psi_im"]);
    for (tj, p) in times.iter().zip(&psi) {
        t.push(vec![num(*tj), num(p.re), num(p.im)]);
    }
    let summary = json!({
        "solver": n.solver,
        "residual": residual.map(num),
        "warnings": warnings,
    });
    Ok((summary, t))
}

fn transform_value(
    cfg: &RunConfig,
    k: &KernelSpec,
    m: &ModelParams,
) -> Result<TransformValue, RunError> {
    let n = &cfg.numerics;
    let e = cfg.exponent();
    Ok(match n.solver.as_str() {
        "volterra" => cf_general(k, m, &e, n.horizon, n.steps)?,
        "fractional" => {
            let u = price_only(&e, "fractional")?;
            cf_rough_heston(rough_alpha(k, "fractional")?, m, u, n.horizon, n.steps)?
        }
        "lift" => cf_lift_general(&lift_atoms(cfg, k, n.atoms)?, m, &e, n.horizon, n.steps)?,
        other => {
            return Err(invalid(format!(
                "numerics.solver = {other:?} does not assemble transforms"
            )))
        }
    })
}

fn cf(cfg: &RunConfig, k: &KernelSpec, m: &ModelParams) -> Result<(Value, Table), RunError> {
    let tv = transform_value(cfg, k, m)?;
    let e = tv.exponent;
    let mut t = Table::new(&[
        "u",
        "v",
        "w",
        "horizon",
        "value_re",
        "value_im",
        "formulation",
    ]);
    let formulation = serde_json::to_value(tv.formulation).unwrap_or(Value::Null);
    t.push(vec![
        json!(config::format_complex(e.u)),
        json!(config::format_complex(e.v)),
        json!(config::format_complex(e.w)),
        num(tv.horizon),
        num(tv.value.re),
        num(tv.value.im),
        formulation.clone(),
    ]);
    let summary = json!({
        "u": config::format_complex(e.u),
        "v": config::format_complex(e.v),
        "w": config::format_complex(e.w),
        "horizon": tv.horizon,
        "value_re": num(tv.value.re),
        "value_im": num(tv.value.im),
        "formulation": formulation,
        "warnings": tv.warnings,
    });
    Ok((summary, t))
}

fn price(cfg: &RunConfig, k: &KernelSpec, m: &ModelParams) -> Result<(Value, Table), RunError> {
    let n = &cfg.numerics;
    let kind = if cfg.price.kind == "put" {
        OptionKind::Put
    } else {
        OptionKind::Call
    };
    let pricer = FourierPricer::new(k, m, n.horizon, n.steps, cfg.inversion_grid())?;
    let s0 = pricer.s0;
    let mut t = Table::new(&["strike", "horizon", "kind", "price", "implied_vol"]);
    let mut warnings = Vec::new();
    for &strike in &cfg.price.strikes {
        let p = pricer.price(strike, kind)?;
        let call = match kind {
            OptionKind::Call => p,
            OptionKind::Put => p + s0 - strike,
        };
        let iv = match implied_vol(call, s0, strike, n.horizon) {
            Ok(v) => num(v),
            Err(e) => {
                warnings.push(format!("strike {strike}: {e}"));
                Value::Null
            }
        };
        t.push(vec![
            num(strike),
            num(n.horizon),
            json!(cfg.price.kind),
            num(p),
            iv,
        ]);
    }
    let summary = json!({
        "s0": s0,
        "control_variate_vol": num(pricer.cv_vol),
        "nodes": pricer.nodes.len(),
        "warnings": warnings,
    });
    Ok((summary, t))
}

fn simulate_paths(
    cfg: &RunConfig,
    k: &KernelSpec,
    m: &ModelParams,
    store_paths: bool,
) -> Result<PathSet, RunError> {
    let n = &cfg.numerics;
    let s = &cfg.simulate;
    let sim = SimConfig {
        with_price: s.with_price,
        store_paths,
    };
    Ok(match s.scheme.as_str() {
        "volterra" => simulate_volterra_with(k, m, n.horizon, n.steps, s.paths, s.seed, sim)?,
        "ou" => {
            if s.with_price {
                return Err(invalid(
                    "simulate.scheme = \"ou\" does not simulate the price",
                ));
            }
            simulate_volterra_ou(k, m, n.horizon, n.steps, s.paths, s.seed)?
        }
        _ => {
            let atoms = lift_atoms(cfg, k, n.atoms)?;
            simulate_lift_with(&atoms, m, n.horizon, n.steps, s.paths, s.seed, sim)?
        }
    })
}

/// Mean, standard error and unbiased variance of one column.
fn column_stats(xs: impl Iterator<Item = f64>, count: usize) -> (f64, f64, f64) {
    let xs: Vec<f64> = xs.collect();
    let (mean, se) = volterra_core::mean_and_se(&xs);
    let var = if count > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64
    } else {
        0.0
    };
    (mean, se, var)
}

fn simulate(cfg: &RunConfig, k: &KernelSpec, m: &ModelParams) -> Result<(Value, Table), RunError> {
    let s = &cfg.simulate;
    let dump = s.output == "paths";
    let p = simulate_paths(cfg, k, m, true)?;
    let np = p.n_paths;
    let steps = p.grid.steps;
    let with_l = p.l_paths.is_some();
    let table = if dump {
        let mut cols = vec!["path", "t", "v"];
        if with_l {
            cols.push("l");
        }
        let mut t = Table::new(&cols);
        for i in 0..np {
            let v = p.v_path(i).expect("paths stored");
            for j in 0..=steps {
                let mut row = vec![json!(i), num(p.grid.t(j)), num(v[j])];
                if let Some(l) = p.l_path(i) {
                    row.push(num(l[j]));
                }
                t.push(row);
            }
        }
        t
    } else {
        let mut cols = vec!["t", "mean_v", "se_v", "var_v"];
        if with_l {
            cols.extend(["mean_s", "se_s"]);
        }
        let mut t = Table::new(&cols);
        for j in 0..=steps {
            let (mean, se, var) =
                column_stats((0..np).map(|i| p.v_path(i).expect("paths stored")[j]), np);
            let mut row = vec![num(p.grid.t(j)), num(mean), num(se), num(var)];
            if with_l {
                let (ms, ses, _) = column_stats(
                    (0..np).map(|i| p.l_path(i).expect("paths stored")[j].exp()),
                    np,
                );
                row.extend([num(ms), num(ses)]);
            }
            t.push(row);
        }
        t
    };
    let (mean_t, se_t, _) = column_stats(p.v_terminal.iter().copied(), np);
    let summary = json!({
        "scheme": p.scheme,
        "paths": np,
        "seed": p.seed,
        "truncated_fraction": num(p.truncated),
        "mean_v_terminal": num(mean_t),
        "se_v_terminal": num(se_t),
    });
    Ok((summary, table))
}

struct MomentRow {
    moment: &'static str,
    volterra: f64,
    volterra_se: f64,
    lift: f64,
    lift_se: f64,
    z: f64,
}

fn lift_compare(
    cfg: &RunConfig,
    k: &KernelSpec,
    m: &ModelParams,
) -> Result<(Value, Table), RunError> {
    let n = &cfg.numerics;
    let l = &cfg.lift;
    if matches!(k, KernelSpec::ExponentialSum { .. }) {
        return Err(invalid(
            "lift-compare needs a kernel with a continuous measure, not exp_sum",
        ));
    }
    let u = config::parse_complex(&l.u).map_err(invalid)?;
    let e = ExponentTriple::price(u);
    let reference = solve_riccati_volterra(k, m, &e, n.horizon, n.steps)?;
    let ref_cf = cf_general(k, m, &e, n.horizon, n.steps)?.value;
    let mut t = Table::new(&["atoms", "psi_sup_error", "cf_error"]);
    let mut finest = Vec::new();
    for &count in &l.atom_counts {
        let atoms = discretize_measure(&measure_of(k)?, count, n.x_max)?;
        let s = solve_lift_transform(&atoms, m, &e, n.horizon, n.steps)?;
        let sup = s
            .psi_reduced
            .iter()
            .zip(&reference.psi)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let value = cf_lift_general(&atoms, m, &e, n.horizon, n.steps)?.value;
        t.push(vec![json!(count), num(sup), num((value - ref_cf).norm())]);
        finest = atoms;
    }
    let errors: Vec<f64> = t
        .rows
        .iter()
        .map(|r| r[1].as_f64().unwrap_or(f64::NAN))
        .collect();
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);

    let mut moments = Vec::new();
    if l.paths > 0 {
        let sim = SimConfig {
            with_price: false,
            store_paths: false,
        };
        let vol = simulate_volterra_with(k, m, n.horizon, l.steps, l.paths, l.seed, sim)?;
        let lift = simulate_lift_with(&finest, m, n.horizon, l.steps, l.paths, l.seed, sim)?;
        let sq = |p: &PathSet| -> Vec<f64> { p.v_terminal.iter().map(|x| x * x).collect() };
        let zero = Complex64::default();
        let laplace = ExponentTriple::new(zero, Complex64::new(-1.0, 0.0), zero);
        let (lv, lv_se) = mc_transform(&vol, &laplace)?;
        let (ll, ll_se) = mc_transform(&lift, &laplace)?;
        for (name, a, b) in [
            ("mean_v", vol.v_terminal.clone(), lift.v_terminal.clone()),
            ("second_moment_v", sq(&vol), sq(&lift)),
        ] {
            let (ma, sa) = volterra_core::mean_and_se(&a);
            let (mb, sb) = volterra_core::mean_and_se(&b);
            moments.push(MomentRow {
                moment: name,
                volterra: ma,
                volterra_se: sa,
                lift: mb,
                lift_se: sb,
                z: (ma - mb) / sa.hypot(sb),
            });
        }
        moments.push(MomentRow {
            moment: "laplace_v_minus_1",
            volterra: lv.re,
            volterra_se: lv_se,
            lift: ll.re,
            lift_se: ll_se,
            z: (lv.re - ll.re) / lv_se.hypot(ll_se),
        });
    }
    let summary = json!({
        "u": config::format_complex(u),
        "reference_residual": num(reference.residual),
        "strictly_decreasing": decreasing,
        "monte_carlo": moments.iter().map(|r| json!({
            "moment": r.moment,
            "volterra": num(r.volterra),
            "volterra_se": num(r.volterra_se),
            "lift": num(r.lift),
            "lift_se": num(r.lift_se),
            "z": num(r.z),
        })).collect::<Vec<_>>(),
    });
    Ok((summary, t))
}

/// Help text listing the CSV columns of each command.
pub fn csv_columns_help() -> String {
    let mut s = String::from("CSV columns:\n");
    for (cmd, cols) in [
        (
            "resolvent",
            "t, r, int_r (r is empty at t = 0 for a singular kernel)",
        ),
        ("riccati", "t, psi_re, psi_im"),
        ("cf", "u, v, w, horizon, value_re, value_im, formulation"),
        ("price", "strike, horizon, kind, price, implied_vol"),
        (
            "simulate",
            "summary: t, mean_v, se_v, var_v [, mean_s, se_s]; paths: path, t, v [, l]",
        ),
        ("lift-compare", "atoms, psi_sup_error, cf_error"),
    ] {
        let _ = writeln!(s, "  {cmd:<13} {cols}");
    }
    s
}
