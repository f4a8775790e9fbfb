use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ivbounds::data::KindOverride;
use ivbounds::empirics::BinRule;
use ivbounds::simulator::{self, DgpConfig};
use ivbounds::{load_csv, ColumnMap, OutcomeRange, Sample, Settings};

mod replicate;
mod report;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ivbounds::Error),
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
    #[error("missing data: {0}")]
    MissingData(&'static str),
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "ivbounds",
    version,
    about = "Bounds on treatment effects in experiments with noncompliance"
)]
struct Cli {
    /// Worker threads for data-parallel steps.
    #[arg(long, global = true, env = "IVBOUNDS_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full report: cell moments, validity checks, identified sets, robust bound, intervals.
    Analyze(DataArgs),
    /// Draw a double-hurdle sample.
    Simulate(SimArgs),
    /// Testable implications only.
    Test(DataArgs),
    /// Trimming bounds with Imbens-Manski intervals.
    Ci(DataArgs),
    /// Reproduce reference numbers and report PASS/FAIL per target.
    Replicate(ReplicateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Auto,
    Discrete,
    Continuous,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "y")]
    y: String,
    #[arg(long, default_value = "d")]
    d: String,
    #[arg(long, default_value = "z")]
    z: String,
    /// Logical lower end of the outcome range (sample minimum by default).
    #[arg(long, requires = "y_max", allow_hyphen_values = true)]
    y_min: Option<f64>,
    #[arg(long, requires = "y_min", allow_hyphen_values = true)]
    y_max: Option<f64>,
    /// Bin count for continuous outcomes, or `fd` for Freedman-Diaconis.
    #[arg(long, default_value = "fd")]
    bins: String,
    /// Interior points of the defier-share grid.
    #[arg(long, default_value_t = 101)]
    grid: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, value_enum, default_value = "auto")]
    outcome_kind: KindArg,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl DataArgs {
    fn settings(&self) -> CliResult<Settings> {
        let bins = parse_bins(&self.bins)?;
        let outcome_range = match (self.y_min, self.y_max) {
            (Some(lo), Some(hi)) if lo <= hi => Some(OutcomeRange { lo, hi }),
            (Some(_), Some(_)) => return Err(CliError::Usage("--y-min exceeds --y-max".into())),
            _ => None,
        };
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(ivbounds::Error::BadLevel(self.level).into());
        }
        Ok(Settings {
            outcome_range,
            bins,
            grid_points: self.grid,
            level: self.level,
        })
    }

    fn load(&self) -> CliResult<Sample> {
        let cols = ColumnMap {
            y: self.y.clone(),
            d: self.d.clone(),
            z: self.z.clone(),
        };
        let kind = match self.outcome_kind {
            KindArg::Auto => KindOverride::Auto,
            KindArg::Discrete => KindOverride::Discrete,
            KindArg::Continuous => KindOverride::Continuous,
        };
        let sample = load_csv(&self.data, &cols)?.with_kind(kind);
        sample.require_arms()?;
        Ok(sample)
    }
}

pub fn parse_bins(s: &str) -> CliResult<BinRule> {
    if s.eq_ignore_ascii_case("fd") {
        return Ok(BinRule::FreedmanDiaconis);
    }
    match s.parse::<usize>() {
        Ok(k) if k > 0 => Ok(BinRule::Count(k)),
        _ => Err(CliError::Usage(format!(
            "--bins expects `fd` or a positive integer, got `{s}`"
        ))),
    }
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    rho: f64,
    #[arg(long, default_value_t = 1_000_000)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 5.0)]
    beta_scale: f64,
    #[arg(long, default_value_t = 0.5)]
    u_scale: f64,
    /// Output CSV with columns y,d,z.
    #[arg(long, default_value = "simulated.csv")]
    out: PathBuf,
    /// Also write D0,D1,T,Y1,Y0 to a sidecar next to the output.
    #[arg(long)]
    emit_latents: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    /// Type shares, LATEs, first stage and IV estimand of the independent design.
    DoubleHurdle,
    /// LATE bands over the defier-share grid.
    Bands,
    /// Defier-share bounds when the instrument is correlated with the costs.
    Correlated,
    /// Shares, trimming bounds, intervals and branch choice on the schooling data.
    Card,
}

#[derive(Debug, Args)]
struct ReplicateArgs {
    #[arg(value_enum)]
    target: Target,
    /// Schooling extract (columns lwage, college, nearc4) for `card`.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000_000)]
    n: usize,
    #[arg(long, default_value_t = replicate::DEFAULT_SEED)]
    seed: u64,
    /// Where `bands` writes its CSV series.
    #[arg(long, default_value = "bands.csv")]
    out: PathBuf,
}

pub fn latents_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("simulated");
    out.with_file_name(format!("{stem}.latents.csv"))
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<bool> {
    if let Some(t) = cli.threads.filter(|&t| t > 0) {
        ivbounds::par::set_global_threads(t);
    }
    match cli.command {
        Command::Analyze(a) => {
            let sample = a.load()?;
            let r = report::analyze(&sample, &a.settings()?, &a.data)?;
            write_json(&r, a.out.as_deref())?;
        }
        Command::Test(a) => {
            let sample = a.load()?;
            let r = report::validity(&sample, &a.settings()?, &a.data)?;
            write_json(&r, a.out.as_deref())?;
        }
        Command::Ci(a) => {
            let sample = a.load()?;
            let r = report::intervals(&sample, &a.settings()?, &a.data)?;
            write_json(&r, a.out.as_deref())?;
        }
        Command::Simulate(s) => {
            let cfg = DgpConfig {
                beta_scale: s.beta_scale,
                u_scale: s.u_scale,
                ..DgpConfig::new(s.rho, s.n, s.seed)
            };
            let out = simulator::simulate(&cfg)?;
            let side = s.emit_latents.then(|| latents_path(&s.out));
            simulator::save(&out, &s.out, side.as_deref())?;
            eprintln!("wrote {} rows to {}", out.sample.len(), s.out.display());
            if let Some(p) = side {
                eprintln!("wrote latents to {}", p.display());
            }
        }
        Command::Replicate(r) => {
            let checks = replicate::run(r.target, r.data.as_deref(), r.n, r.seed, &r.out)?;
            let stdout = io::stdout();
            let mut w = stdout.lock();
            for c in &checks {
                writeln!(w, "{c}")?;
            }
            return Ok(checks.iter().all(|c| c.pass));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
