//! `dce`: run protocols, optimizations and robustness sweeps from a JSON
//! configuration and write a trajectory CSV plus a result JSON.

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

/// Thread count for parallel sweeps.
const THREADS_ENV: &str = "DCE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "dce",
    version,
    about = "Photon generation in a driven qubit-cavity system"
)]
struct Args {
    /// Strategy to run; overrides the configuration's `strategy`.
    #[arg(value_enum)]
    strategy: Option<config::Strategy>,
    /// Configuration file (JSON), or the result JSON of an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Directory receiving the outputs.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Seed for every random draw; overrides the configuration's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted-path assignment applied to the configuration, e.g.
    /// `model.lambda=0.83`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<dce_core::Error> for CliError {
    fn from(e: dce_core::Error) -> Self {
        match e.failure_time() {
            Some(t) => CliError::Numerical(format!("{e} (at t = {t})")),
            None => CliError::Config(e.to_string()),
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Config(format!(
            "{THREADS_ENV} must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot start {n} threads: {e}")))
}

fn run(args: Args) -> Result<(), CliError> {
    configure_threads()?;
    let mut cfg = config::load(&args.config, &args.overrides)?;
    if let Some(s) = args.strategy {
        cfg.strategy = Some(s);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let base_dir = args.config.parent().map(PathBuf::from).unwrap_or_default();
    let resolved = cfg.resolve(&base_dir)?;
    let result = run::execute(resolved, &args.out_dir)?;
    match result.f {
        Some(f) => println!("{}: f = {f}", result.strategy),
        None => println!("{}: done", result.strategy),
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dce: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
