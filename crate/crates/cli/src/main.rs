use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use volterra_cli::{csv_columns_help, parse_config_with, run, Command, Format, RunError};

/// Transforms, prices and simulations for affine Volterra models.
///
/// Exit status: 0 on success, 2 for invalid input, 3 for numerical failure.
/// Errors are written to stderr as JSON and nothing is written to stdout.
#[derive(Debug, Parser)]
#[command(name = "volterra", version, after_help = csv_columns_help())]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// TOML or JSON configuration; `-` reads stdin.
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// Override a configuration entry, e.g. `--set model.rho=-0.7`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,

    /// Write the artifact here instead of stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,

    /// Defaults to CSV for resolvent, riccati and simulate, JSON otherwise.
    #[arg(short, long, value_enum)]
    format: Option<Format>,

    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// volterra, fractional, convolution or lift.
    #[arg(long)]
    solver: Option<String>,
    /// Complex exponents as "re,im".
    #[arg(long, allow_hyphen_values = true)]
    u: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    v: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    w: Option<String>,
    /// Comma-separated strikes.
    #[arg(long)]
    strikes: Option<String>,
    /// call or put.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// volterra, ou or lift.
    #[arg(long)]
    scheme: Option<String>,
    /// summary or paths.
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    with_price: bool,
}

impl Cli {
    /// Dedicated flags become overrides applied after `--set`, so they win.
    fn overrides(&self) -> Vec<String> {
        let mut out = self.overrides.clone();
        let mut add = |key: &str, val: Option<String>| {
            if let Some(v) = val {
                out.push(format!("{key}={v}"));
            }
        };
        add("numerics.horizon", self.horizon.map(|x| x.to_string()));
        add("numerics.steps", self.steps.map(|x| x.to_string()));
        add("numerics.solver", self.solver.clone());
        add("transform.u", self.u.clone());
        add("transform.v", self.v.clone());
        add("transform.w", self.w.clone());
        add(
            "price.strikes",
            self.strikes.as_ref().map(|s| format!("[{s}]")),
        );
        add("price.kind", self.kind.clone());
        add("simulate.paths", self.paths.map(|x| x.to_string()));
        add("simulate.seed", self.seed.map(|x| x.to_string()));
        add("simulate.scheme", self.scheme.clone());
        add("simulate.output", self.output.clone());
        if self.with_price {
            out.push("simulate.with_price=true".into());
        }
        out
    }
}

fn read_config(path: &Option<PathBuf>) -> Result<String, RunError> {
    let io = |e: std::io::Error| {
        volterra_cli::ConfigError(vec![format!("reading the configuration: {e}")])
    };
    match path {
        None => Ok(String::new()),
        Some(p) if p.as_os_str() == "-" => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(io)?;
            Ok(s)
        }
        Some(p) => Ok(std::fs::read_to_string(p).map_err(io)?),
    }
}

fn execute(cli: &Cli) -> Result<String, RunError> {
    let text = read_config(&cli.config)?;
    let cfg = parse_config_with(&text, &cli.overrides())?;
    let report = run(cli.command, &cfg)?;
    Ok(report.render(cli.format.unwrap_or(cli.command.default_format())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = execute(&cli).and_then(|text| {
        let written = match &cli.out {
            Some(p) => std::fs::write(p, &text),
            None => std::io::stdout().write_all(text.as_bytes()),
        };
        written.map_err(|e| {
            RunError::Config(volterra_cli::ConfigError(vec![format!(
                "writing the output: {e}"
            )]))
        })
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
