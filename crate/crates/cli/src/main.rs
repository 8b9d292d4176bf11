mod report;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cqr_core::battery::{halton_points, RunConfig, IDENTITIES};
use cqr_core::catalog::{builtin, recognize, Expectation, BUILTINS};
use cqr_core::exprdsl::MetricSpec;
use thiserror::Error;

use report::{analyze, render_text, Report};

#[derive(Parser)]
#[command(name = "cqrlab", version, about = "Curvature checks for conformally quasi-recurrent metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every applicable check at the selected points.
    Analyze(Source),
    /// Evaluate one universal identity.
    Identity {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(IDENTITIES))]
        name: String,
        #[command(flatten)]
        source: Source,
    },
    /// List builtin metrics.
    List,
    /// Write a builtin metric to a metric file.
    Export { name: String, path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct Source {
    /// Builtin call or metric file path.
    target: Option<String>,
    #[arg(long, conflicts_with_all = ["builtin", "target"])]
    metric: Option<PathBuf>,
    #[arg(long, conflicts_with = "target")]
    builtin: Option<String>,
    /// Point as `name=value,...`; repeatable.
    #[arg(long)]
    point: Vec<String>,
    /// Number of Halton points in the sample box.
    #[arg(long, conflicts_with = "point")]
    grid: Option<usize>,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(3..=4))]
    order: u8,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Comma-separated check names.
    #[arg(long, value_delimiter = ',')]
    checks: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Seed for randomized builtins.
    #[arg(long)]
    seed: Option<u64>,
    /// Finite-difference fallback for checks that need order 4.
    #[arg(long)]
    fd: bool,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn with_seed(call: &str, seed: Option<u64>) -> String {
    match seed {
        Some(s) if call.trim_start().starts_with("random_poly") && !call.contains("seed") => {
            match call.find('(') {
                Some(open) => format!("{}(seed={s}, {}", &call[..open], &call[open + 1..]),
                None => format!("{}(seed={s})", call.trim()),
            }
        }
        _ => call.to_string(),
    }
}

fn load(src: &Source) -> Result<(MetricSpec, Vec<Expectation>), CliError> {
    let from_file = |path: &Path| -> Result<_, CliError> {
        let spec = MetricSpec::load(path).map_err(input)?;
        let expected = recognize(&spec).map(|e| e.expected).unwrap_or_default();
        Ok((spec, expected))
    };
    if let Some(path) = &src.metric {
        return from_file(path);
    }
    let call = match (&src.builtin, &src.target) {
        (Some(b), _) => b.clone(),
        (None, Some(t)) if Path::new(t).is_file() => return from_file(Path::new(t)),
        (None, Some(t)) => t.clone(),
        (None, None) => return Err(input("no metric given; use a builtin name, --builtin or --metric")),
    };
    let entry = builtin(&with_seed(&call, src.seed)).map_err(input)?;
    Ok((entry.spec, entry.expected))
}

fn parse_point(spec: &MetricSpec, text: &str) -> Result<Vec<f64>, CliError> {
    let n = spec.dimension();
    let mut point = vec![None; n];
    for (k, item) in text.split(',').enumerate() {
        let item = item.trim();
        let (slot, value) = match item.split_once('=') {
            Some((name, v)) => {
                let slot = spec
                    .coordinates
                    .iter()
                    .position(|c| c == name.trim())
                    .ok_or_else(|| input(format!("unknown coordinate `{}` in --point", name.trim())))?;
                (slot, v)
            }
            None => (k, item),
        };
        if slot >= n {
            return Err(input(format!("--point has more than {n} values")));
        }
        let expr = spec.parse(value).map_err(|e| input(format!("--point `{item}`: {e}")))?;
        if expr.depends_on_coordinates() {
            return Err(input(format!("--point `{item}` must be a constant")));
        }
        point[slot] = Some(expr.eval_constant(&spec.parameters).map_err(input)?);
    }
    point
        .iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| input(format!("--point is missing coordinate `{}`", spec.coordinates[i]))))
        .collect()
}

type Setup = (MetricSpec, Vec<Expectation>, Vec<Vec<f64>>, RunConfig);

fn setup(src: &Source) -> Result<Setup, CliError> {
    if src.tol.is_nan() || src.tol <= 0.0 {
        return Err(input("--tol must be positive"));
    }
    let (spec, expected) = load(src)?;
    let points = if src.point.is_empty() {
        let count = src.grid.unwrap_or(5);
        if count == 0 {
            return Err(input("--grid must be at least 1"));
        }
        halton_points(&spec, count)
    } else {
        src.point.iter().map(|p| parse_point(&spec, p)).collect::<Result<_, _>>()?
    };
    let checks: BTreeSet<String> = src.checks.iter().map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect();
    let cfg = RunConfig {
        tol: src.tol,
        order: src.order as usize,
        fd: src.fd,
        checks: (!checks.is_empty()).then_some(checks),
    };
    Ok((spec, expected, points, cfg))
}

fn emit(report: &Report, format: Format) {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(report).expect("report serializes")),
        Format::Text => print!("{}", render_text(report)),
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::List => {
            for (name, summary) in BUILTINS {
                println!("{name:<28} {summary}");
            }
            Ok(0)
        }
        Command::Export { name, path } => {
            let entry = builtin(&name).map_err(input)?;
            entry.spec.save(&path).map_err(input)?;
            Ok(0)
        }
        Command::Analyze(src) => {
            let (spec, expected, points, cfg) = setup(&src)?;
            let report = analyze(&spec, &expected, &points, &cfg, src.seed)?;
            emit(&report, src.format);
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::Identity { name, source } => {
            let (spec, _, points, cfg) = setup(&source)?;
            let report = report::identity(&name, &spec, &points, &cfg, source.seed)?;
            emit(&report, source.format);
            Ok(if report.passed() { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
