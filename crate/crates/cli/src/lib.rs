//! The `iuws` command-line front end.
//!
//! [`run`] parses arguments, executes one subcommand inside a worker pool of
//! `--jobs` threads and maps the outcome to an exit code.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use iuws_core::RunConfig;

pub use report::RunReport;

/// Exit code for a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit code when the verification suite has failing checks.
pub const EXIT_VERIFY_FAILED: i32 = 1;
/// Exit code for usage, config and input validation errors.
pub const EXIT_INVALID: i32 = 2;
/// Exit code when a numerical solver fails.
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] iuws_core::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_solver_failure() => EXIT_SOLVER,
            _ => EXIT_INVALID,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "iuws", version, about = "Torsion, spectrum, capacitary width and heat flow on planar and hyperbolic domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Torsion function `-Δv = 1` and its supremum.
    Torsion(RunArgs),
    /// Principal Dirichlet eigenpair, plus tail widths when `radii` is set.
    Eigen(RunArgs),
    /// Green function with pole at `pole`.
    Green(RunArgs),
    /// Capacitary width at level `eta`.
    Capwidth(RunArgs),
    /// Survival function `P(t, ·)` and its exponential bounds.
    Survival(RunArgs),
    /// Heat-kernel columns `p(t, point, ·)`.
    HeatKernel(RunArgs),
    /// Integral criterion and heat-kernel/eigenfunction ratio spread.
    IuCheck(RunArgs),
    /// Random-walk survival estimates compared with the PDE.
    Mc(RunArgs),
    /// Runs the full check suite on a corpus.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "IUWS_JOBS")]
    jobs: Option<usize>,
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit timestamps and runtimes so reports are byte-identical across runs.
    #[arg(long)]
    no_timestamp: bool,
    /// Grid spacing (physical units).
    #[arg(long, allow_hyphen_values = true)]
    h: Option<f64>,
}

#[derive(Debug, Clone, Args)]
struct RunArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Width level in (0, 1).
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<f64>,
    /// Curvature radius: the surface has curvature `-1/L²` (hyperbolic) and
    /// config lengths are in units of `L`.
    #[arg(long, allow_hyphen_values = true)]
    length_scale: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Args)]
struct VerifyArgs {
    /// Corpus name.
    #[arg(long, default_value = "standard")]
    corpus: String,
    /// Only run checks whose id starts with one of these prefixes.
    #[arg(long)]
    only: Vec<String>,
    #[command(flatten)]
    common: Common,
}

impl RunArgs {
    /// Loads the config and applies command-line overrides.
    fn config(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(h) = self.common.h {
            cfg.h = h;
        }
        if let Some(eta) = self.eta {
            cfg.eta = eta;
        }
        if let Some(seed) = self.common.seed {
            cfg.seed = seed;
        }
        if let Some(l) = self.length_scale {
            cfg.length_scale = l;
        }
        if let Some(out) = &self.common.out {
            cfg.output = out.clone();
        }
        if cfg.name.is_empty() {
            cfg.name = self.config.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    if jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

/// Runs `iuws` with the given arguments (including the program name) and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let jobs = match &cli.command {
        Command::Verify(a) => a.common.jobs,
        Command::Torsion(a)
        | Command::Eigen(a)
        | Command::Green(a)
        | Command::Capwidth(a)
        | Command::Survival(a)
        | Command::HeatKernel(a)
        | Command::IuCheck(a)
        | Command::Mc(a) => a.common.jobs,
    };
    let outcome = pool(jobs).and_then(|p| p.install(|| dispatch(&cli.command)));
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: &Command) -> CliResult<i32> {
    use commands::*;
    let (name, args, op): (&str, &RunArgs, Op) = match command {
        Command::Verify(a) => return verify(&a.corpus, &a.only, &a.common),
        Command::Torsion(a) => ("torsion", a, torsion),
        Command::Eigen(a) => ("eigen", a, eigen),
        Command::Green(a) => ("green", a, green),
        Command::Capwidth(a) => ("capwidth", a, capwidth),
        Command::Survival(a) => ("survival", a, survival),
        Command::HeatKernel(a) => ("heat-kernel", a, heat_kernel),
        Command::IuCheck(a) => ("iu-check", a, iu_check),
        Command::Mc(a) => ("mc", a, mc),
    };
    let cfg = args.config()?;
    let report = execute(name, &cfg, !args.common.no_timestamp, op)?;
    println!("{}", report.to_json()?);
    Ok(EXIT_OK)
}
