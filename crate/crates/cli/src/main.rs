//! `delaystab`: runs solver and verification pipelines from JSON experiment configs.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "delaystab", version, about = "Delay feedback stability solver and verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment configs; several run as a sweep with one output directory each.
    #[arg(required = true)]
    configs: Vec<PathBuf>,
    /// Output directory (default: current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel runs for sweeps.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Solve and write trajectory.csv, energy.csv and run.json.
    Simulate(RunArgs),
    /// Check hypotheses, solve and test the decay bound; writes verify.json.
    Verify(RunArgs),
    /// Compare the solver with the dense-output reference solver.
    CompareOracle(RunArgs),
    /// Estimate (M, ω) for the generator; writes certificate.json.
    EstimateCertificate(RunArgs),
    /// Fit (γ, ω') envelopes of the gain; writes envelope.json.
    FitEnvelope(RunArgs),
}

/// A failed run with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn tolerance(m: impl Into<String>) -> Self {
        Failure { code: 1, message: m.into() }
    }
    pub fn config(m: impl Into<String>) -> Self {
        Failure { code: 2, message: m.into() }
    }
    pub fn solver(m: impl Into<String>) -> Self {
        Failure { code: 3, message: m.into() }
    }
    pub fn hypothesis(m: impl Into<String>) -> Self {
        Failure { code: 4, message: m.into() }
    }
    pub fn bound(m: impl Into<String>) -> Self {
        Failure { code: 5, message: m.into() }
    }
    /// Output files that cannot be written are reported like a bad `--out`.
    pub fn io(m: impl Into<String>) -> Self {
        Failure { code: 2, message: m.into() }
    }
}

type Job = fn(&Path, Option<&Path>) -> Result<String, Failure>;

fn dispatch(command: Command) -> (RunArgs, Job) {
    fn dir(out: Option<&Path>) -> &Path {
        out.unwrap_or(Path::new("."))
    }
    match command {
        Command::Simulate(a) => (a, |c, o| commands::simulate(c, dir(o))),
        Command::Verify(a) => (a, |c, o| commands::verify(c, dir(o))),
        Command::CompareOracle(a) => (a, commands::compare_oracle),
        Command::EstimateCertificate(a) => (a, |c, o| commands::estimate(c, dir(o))),
        Command::FitEnvelope(a) => (a, |c, o| commands::fit_envelopes(c, dir(o))),
    }
}

fn run_dir(base: Option<&Path>, config: &Path, sweep: bool) -> Option<PathBuf> {
    if !sweep {
        return base.map(Path::to_path_buf);
    }
    let stem = config.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    Some(base.unwrap_or(Path::new(".")).join(stem))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, job) = dispatch(cli.command);
    let sweep = args.configs.len() > 1;
    let one = |c: &PathBuf| job(c, run_dir(args.out.as_deref(), c, sweep).as_deref());
    let results: Vec<Result<String, Failure>> = if sweep && args.jobs > 1 {
        match rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build() {
            Ok(pool) => pool.install(|| args.configs.par_iter().map(one).collect()),
            Err(e) => {
                eprintln!("error: cannot start {} workers: {e}", args.jobs);
                return ExitCode::from(2);
            }
        }
    } else {
        args.configs.iter().map(one).collect()
    };
    let mut code = 0;
    for (config, result) in args.configs.iter().zip(results) {
        let prefix = if sweep { format!("{}: ", config.display()) } else { String::new() };
        match result {
            Ok(msg) => println!("{prefix}{msg}"),
            Err(f) => {
                eprintln!("{prefix}error: {}", f.message);
                code = code.max(f.code);
            }
        }
    }
    ExitCode::from(code)
}
