use std::path::PathBuf;
use std::process::ExitCode;

use barron_cli::lower::{run_lower, LowerSpec};
use barron_cli::spec::{Exponent, SweepSpec};
use barron_cli::sweep::run_sweep;
use barron_cli::verify::run_suite;
use barron_cli::CliError;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(name = "barron", version, about = "Constructive Barron-space approximation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error-vs-width sweep; writes CSV rows and fitted log-log slopes
    Sweep(SweepArgs),
    /// Run an identity suite and print a JSON report
    Verify {
        /// multiscale, composition, integral, khintchine or bessel
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sign-stability and L1 lower-bound report for seeded (L,N)-networks
    Lowerbound(LowerArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// JSON file with the same field names as the flags
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long = "L")]
    depth: Option<usize>,
    /// comma-separated widths
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<usize>>,
    /// comma-separated exponents, `inf` allowed
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<Exponent>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    attempts: Option<usize>,
    /// shallow or deep
    #[arg(long)]
    arch: Option<String>,
    /// none, unit or log
    #[arg(long)]
    split: Option<String>,
    /// fail (exit 1) if a fitted slope exceeds this value
    #[arg(long, allow_negative_numbers = true)]
    expect_slope: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LowerArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "L")]
    depth: Option<usize>,
    #[arg(long = "N")]
    width: Option<usize>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    networks: Option<usize>,
    #[arg(long)]
    lines: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn put(map: &mut Map<String, Value>, key: &str, v: Option<Value>) {
    if let Some(v) = v {
        map.insert(key.into(), v);
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<bool, CliError> {
    let mut flags = Map::new();
    put(&mut flags, "target", a.target.map(|t| json!(t)));
    put(&mut flags, "s", a.s.map(|v| json!(v)));
    put(&mut flags, "L", a.depth.map(|v| json!(v)));
    put(&mut flags, "sweep", a.sweep.map(|v| json!(v)));
    put(&mut flags, "p", a.p.map(|v| json!(v)));
    put(&mut flags, "seed", a.seed.map(|v| json!(v)));
    put(&mut flags, "attempts", a.attempts.map(|v| json!(v)));
    put(&mut flags, "arch", a.arch.map(|v| json!(v)));
    put(&mut flags, "split", a.split.map(|v| json!(v)));
    put(&mut flags, "expect_slope", a.expect_slope.map(|v| json!(v)));
    put(&mut flags, "out", a.out.map(|v| json!(v)));
    let spec = SweepSpec::from_sources(a.config.as_deref(), flags)?;
    let output = run_sweep(&spec)?;
    emit(&output.to_csv(), spec.out.as_ref())?;
    let ok = match spec.expect_slope {
        Some(limit) => output.fits.iter().all(|f| f.slope <= limit),
        None => true,
    };
    Ok(ok)
}

fn lowerbound(a: LowerArgs) -> Result<bool, CliError> {
    let mut flags = Map::new();
    put(&mut flags, "L", a.depth.map(|v| json!(v)));
    put(&mut flags, "N", a.width.map(|v| json!(v)));
    put(&mut flags, "s", a.s.map(|v| json!(v)));
    put(&mut flags, "eps", a.eps.map(|v| json!(v)));
    put(&mut flags, "d", a.d.map(|v| json!(v)));
    put(&mut flags, "networks", a.networks.map(|v| json!(v)));
    put(&mut flags, "lines", a.lines.map(|v| json!(v)));
    put(&mut flags, "seed", a.seed.map(|v| json!(v)));
    let spec = LowerSpec::from_sources(a.config.as_deref(), flags)?;
    let report = run_lower(&spec)?;
    emit(&(report.to_json() + "\n"), a.out.as_ref())?;
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Verify { suite, out } => run_suite(&suite).and_then(|r| {
            emit(&(r.to_json() + "\n"), out.as_ref())?;
            Ok(r.pass)
        }),
        Command::Lowerbound(a) => lowerbound(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("barron: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
