//! `phnlab`: experiment driver around `phnlab-core`.
//!
//! ```text
//! phnlab <subcommand> --config path [--out dir] [--seed N] [--workers N]
//! ```
//!
//! Exit codes: 0 on success, 2 for rejected input, 3 for numerical failure.

mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::ExperimentConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Failure classes of a run.
#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<phnlab_core::Error> for CliError {
    fn from(e: phnlab_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Invalid(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Invalid(format!("io: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "phnlab", version, about = "Invariant-measure experiments for the M/Ph/n+M diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct CommonArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides `master_seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; falls back to PHNLAB_WORKERS, then `n_workers`.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the model and print its coefficients.
    ValidateModel(CommonArgs),
    /// Draw invariant-measure samples.
    Sample(CommonArgs),
    /// W1 error against the step size.
    Converge(CommonArgs),
    /// Normality of ergodic means.
    Clt(CommonArgs),
    /// Moderate-deviation tail rates.
    Mdp(CommonArgs),
    /// Weighted occupation time near the kink.
    Occupation(CommonArgs),
    /// Lyapunov drift-constant audit.
    LyapunovAudit(CommonArgs),
    /// Queue steady state against the diffusion.
    QueueCompare(CommonArgs),
}

impl Command {
    fn parts(&self) -> (&'static str, &CommonArgs) {
        match self {
            Command::ValidateModel(a) => ("validate-model", a),
            Command::Sample(a) => ("sample", a),
            Command::Converge(a) => ("converge", a),
            Command::Clt(a) => ("clt", a),
            Command::Mdp(a) => ("mdp", a),
            Command::Occupation(a) => ("occupation", a),
            Command::LyapunovAudit(a) => ("lyapunov-audit", a),
            Command::QueueCompare(a) => ("queue-compare", a),
        }
    }
}

/// Everything a subcommand needs after flags, environment and file are merged.
pub struct Context {
    pub subcommand: &'static str,
    /// Config with seed, workers and output directory filled in.
    pub config: ExperimentConfig,
    pub seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub header: output::Header,
}

fn resolve_workers(flag: Option<usize>, config: Option<usize>) -> Result<usize, CliError> {
    let from_env = match std::env::var("PHNLAB_WORKERS") {
        Ok(v) if !v.trim().is_empty() => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Invalid(format!("PHNLAB_WORKERS is not a count: {v}")))?,
        ),
        _ => None,
    };
    let n = flag
        .or(from_env)
        .or(config)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if n == 0 {
        return Err(CliError::Invalid("worker count must be at least 1".into()));
    }
    Ok(n)
}

fn prepare(name: &'static str, args: &CommonArgs) -> Result<Context, CliError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    let seed = args.seed.or(config.master_seed).unwrap_or(0);
    let workers = resolve_workers(args.workers, config.n_workers)?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("phnlab_out"));
    config.master_seed = Some(seed);
    config.n_workers = Some(workers);
    config.output_dir = Some(out_dir.clone());
    let header = output::Header::new(&config.hashed_view(), seed);
    Ok(Context {
        subcommand: name,
        config,
        seed,
        workers,
        out_dir,
        header,
    })
}

fn execute(cmd: &Command) -> Result<(), CliError> {
    let (name, args) = cmd.parts();
    let ctx = prepare(name, args)?;
    std::fs::create_dir_all(&ctx.out_dir).map_err(|e| {
        CliError::Invalid(format!("output directory {} is not writable: {e}", ctx.out_dir.display()))
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.workers)
        .build()
        .map_err(|e| CliError::Invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| commands::dispatch(&ctx))
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("phnlab {}: {e}", cli.command.parts().0);
            e.exit_code()
        }
    }
}
