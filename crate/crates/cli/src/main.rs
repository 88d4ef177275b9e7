//! `hypocert`: index, certificate, short-time and port-Hamiltonian reports
//! for matrix files, written as JSON with sorted keys.

mod commands;
mod error;
mod input;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hypocert::index::GridSpec;
use serde_json::{json, Map, Value};

use crate::error::CliError;

const AFTER_HELP: &str = "\
Exit codes:
  0  every check passed
  1  negative result: not hypocoercive, or conservative dynamics
  2  input error: unreadable or malformed file, invalid flag or mode set
  3  internal disagreement: index routes differ or a numerical check failed
  4  conditioning: the short-time window is too ill-conditioned; the report
     suggests a window

Environment:
  HYPOCERT_THREADS  caps the number of worker threads

Matrix files are JSON: {\"n\": 2, \"C\": [[..]], \"weight\": [[..]]} or
{\"n\": 2, \"P1\": [[..]], \"R\": [[..]], \"H\": [[..]]}; entries are numbers or
[re, im] pairs.";

#[derive(Parser)]
#[command(name = "hypocert", version, about, after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hypocoercivity index by the skew-sum, full-sum and Kalman routes
    Index(IndexArgs),
    /// Constructive certificate and Lyapunov blocks for a mode family
    Certify(CertifyArgs),
    /// Short-time decay exponent and uniform two-sided bound
    Shorttime(ShortTimeArgs),
    /// Decay of a periodic port-Hamiltonian system given by P1, R, H
    Ph(PhArgs),
}

#[derive(Args)]
struct IndexArgs {
    /// Matrix file
    input: PathBuf,
    /// Absolute positivity threshold for the Loewner sums [default: 1e-9 ||C||]
    #[arg(long)]
    tol: Option<f64>,
    /// Largest index searched [default: n]
    #[arg(long = "max-m")]
    max_m: Option<usize>,
}

#[derive(Args)]
struct CertifyArgs {
    input: PathBuf,
    /// Modes: "a..b" for ±a..±b, or a comma-separated list
    #[arg(long, default_value = "1..20", allow_hyphen_values = true)]
    modes: String,
    /// Initial step of the certified infimum grid
    #[arg(long = "grid-step", default_value_t = GridSpec::default().step)]
    grid_step: f64,
}

#[derive(Args)]
struct ShortTimeArgs {
    input: PathBuf,
    /// Modes to fit: "a..b" for ±a..±b, or a comma-separated list
    #[arg(long, default_value = "1,2,4,8,16", allow_hyphen_values = true)]
    modes: String,
    /// Fit window "lo,hi" in units of 1/||C_eta||
    #[arg(long, default_value = "1e-3,1e-2")]
    window: String,
    /// Log-spaced samples per window
    #[arg(long, default_value_t = 30)]
    samples: usize,
    /// Directory for CSV copies of the curves
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct PhArgs {
    input: PathBuf,
    /// Fourier truncation: modes |m| <= M
    #[arg(long = "M", default_value_t = 64)]
    m_max: u64,
    /// Long-time grid "T,N": N uniform samples on (0, T]
    #[arg(long = "t-grid", default_value = "60,600")]
    t_grid: String,
    /// Short-time fit window "lo,hi" in units of 1/max ||C_m||
    #[arg(long, default_value = "1e-3,1e-2")]
    window: String,
    /// Log-spaced samples in the fit window
    #[arg(long, default_value_t = 40)]
    samples: usize,
    /// Initial data: {"samples": [[..], ..]} at zeta = 2 pi k / N
    #[arg(long)]
    init: Option<PathBuf>,
    /// Directory for CSV copies of the curves
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("HYPOCERT_THREADS") else {
        return Ok(());
    };
    let threads: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::input(format!("HYPOCERT_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::input(format!("cannot start thread pool: {e}")))
}

fn path_flag(p: &Option<PathBuf>) -> Value {
    json!(p.as_ref().map(|p| p.display().to_string()))
}

fn run(command: &Command) -> Result<(Map<String, Value>, u8), CliError> {
    init_threads()?;
    let (path, flags): (&Path, Value) = match command {
        Command::Index(a) => (&a.input, json!({ "tol": a.tol, "max_m": a.max_m })),
        Command::Certify(a) => (&a.input, json!({ "modes": a.modes, "grid_step": a.grid_step })),
        Command::Shorttime(a) => (
            &a.input,
            json!({ "modes": a.modes, "window": a.window, "samples": a.samples, "csv": path_flag(&a.csv) }),
        ),
        Command::Ph(a) => (
            &a.input,
            json!({ "M": a.m_max, "t_grid": a.t_grid, "window": a.window, "samples": a.samples,
                    "init": path_flag(&a.init), "csv": path_flag(&a.csv) }),
        ),
    };
    let loaded = input::load_matrix_file(path)?;
    let file = &loaded.value;
    let outcome = match command {
        Command::Index(a) => commands::index(&file.weighted_operator()?, a.tol, a.max_m)?,
        Command::Certify(a) => commands::certify(&file.weighted_operator()?, &a.modes, a.grid_step)?,
        Command::Shorttime(a) => {
            let args = commands::ShortTimeArgs {
                modes: &a.modes,
                window: commands::parse_pair("window", &a.window)?,
                samples: a.samples,
                csv: a.csv.as_deref(),
            };
            commands::shorttime(&file.weighted_operator()?, &args)?
        }
        Command::Ph(a) => {
            let (horizon, count) = commands::parse_pair("t-grid", &a.t_grid)?;
            if count.fract() != 0.0 || count < 0.0 {
                return Err(CliError::input(format!("--t-grid sample count must be an integer, got {count}")));
            }
            let args = commands::PhArgs {
                m_max: a.m_max,
                t_grid: (horizon, count as usize),
                window: commands::parse_pair("window", &a.window)?,
                samples: a.samples,
                init: a.init.as_deref(),
                csv: a.csv.as_deref(),
            };
            commands::ph(file, &args)?
        }
    };
    let mut report = outcome.sections;
    report.insert("flags".into(), flags);
    report.insert("input".into(), file.to_json());
    report.insert("input_sha256".into(), json!(loaded.sha256));
    Ok((report, outcome.code))
}

fn name(command: &Command) -> &'static str {
    match command {
        Command::Index(_) => "index",
        Command::Certify(_) => "certify",
        Command::Shorttime(_) => "shorttime",
        Command::Ph(_) => "ph",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mut report, code) = match run(&cli.command) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("hypocert: {}", e.message);
            let mut report = Map::new();
            report.insert("error".into(), e.to_json());
            (report, e.code)
        }
    };
    report.insert("command".into(), json!(name(&cli.command)));
    report.insert("exit_code".into(), json!(code));
    report.insert(
        "tool".into(),
        json!({ "name": "hypocert", "version": env!("CARGO_PKG_VERSION") }),
    );
    let text = serde_json::to_string_pretty(&Value::Object(report)).expect("reports serialize");
    let mut out = std::io::stdout().lock();
    if writeln!(out, "{text}").and_then(|_| out.flush()).is_err() {
        return ExitCode::from(error::INPUT);
    }
    ExitCode::from(code)
}
