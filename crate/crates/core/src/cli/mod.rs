//! Configuration-driven command line entry point.
//!
//! Every subcommand reads one JSON [`RunConfig`], writes its CSV and JSON
//! artifacts into the output directory and prints one summary line per
//! check. Exit status is 0 on success, 1 when a verification fails and 2 on
//! any configuration or input error.

mod commands;
mod config;
mod output;
mod pipeline;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{parse_config, LoadedConfig, MuSpec, NamedProcess, Preset, RunConfig};
pub use output::Output;
pub use pipeline::{verify_all, AllReport, StageReport, StageStatus};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub(crate) fn config(field: &str, err: impl std::fmt::Display) -> Self {
        CliError::Config(format!("at `{field}`: {err}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "hyperwalk", version, about = "Random walks on hyperbolic spaces: estimators and verifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config; default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Trial count (overrides the config).
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pólya walk moment generating function on a t grid.
    Polya(Common),
    /// Empirical drift |w_n| / n.
    Drift(Common),
    /// Decay curve P(|w_{ai}| ≤ i/C) and exponential fit.
    Decay(Common),
    /// Shadow decay in d for the walk and the reflected walk.
    Shadow(Common),
    /// Uniform shadow decay and (d, k) certification.
    UniformShadow(Common),
    /// Horofunction moment generating function over a family.
    HorofnMgf(Common),
    /// Conditional progress moment generating function of |w_{aj}|.
    ProgressMgf(Common),
    /// Geometric shadow step on enumerated or sampled triples.
    VerifyBack(Common),
    /// Horofunction bounds and the moment estimate.
    VerifyHoro(Common),
    /// Exact progress chain on a synthetic lattice process.
    VerifyProg(Common),
    /// Exact iterated-to-full decay on a synthetic lattice process.
    VerifyIter(Common),
    /// Exact hierarchy of progress properties on synthetic processes.
    VerifyHierarchy(Common),
    /// The full chain, halting at the first failing stage.
    VerifyAll(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Polya(c) => ("polya", c),
            Command::Drift(c) => ("drift", c),
            Command::Decay(c) => ("decay", c),
            Command::Shadow(c) => ("shadow", c),
            Command::UniformShadow(c) => ("uniform-shadow", c),
            Command::HorofnMgf(c) => ("horofn-mgf", c),
            Command::ProgressMgf(c) => ("progress-mgf", c),
            Command::VerifyBack(c) => ("verify-back", c),
            Command::VerifyHoro(c) => ("verify-horo", c),
            Command::VerifyProg(c) => ("verify-prog", c),
            Command::VerifyIter(c) => ("verify-iter", c),
            Command::VerifyHierarchy(c) => ("verify-hierarchy", c),
            Command::VerifyAll(c) => ("verify-all", c),
        }
    }
}

/// Result of one subcommand: whether every check passed and the summary
/// lines to print.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub passed: bool,
    pub lines: Vec<String>,
}

impl Outcome {
    pub fn new() -> Self {
        Outcome { passed: true, lines: Vec::new() }
    }

    pub fn line(&mut self, passed: bool, text: String) {
        self.passed &= passed;
        self.lines.push(text);
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let (name, common) = cli.command.parts();
    match execute(name, common) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            if outcome.passed {
                EXIT_OK
            } else {
                EXIT_FAILED
            }
        }
        Err(e) => {
            eprintln!("{name}: {e}");
            EXIT_CONFIG
        }
    }
}

fn execute(name: &str, common: &Common) -> Result<Outcome, CliError> {
    let bytes = std::fs::read(&common.config).map_err(|source| CliError::Io { path: common.config.clone(), source })?;
    let mut loaded = parse_config(&bytes)?;
    if common.seed.is_some() {
        loaded.config.seed = common.seed;
    }
    if common.trials.is_some() {
        loaded.config.trials = common.trials;
    }
    let dir = common
        .out
        .clone()
        .or_else(|| loaded.config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    run_loaded(name, &loaded, dir)
}

/// Runs subcommand `name` on an already parsed config, writing into `dir`.
pub fn run_loaded(name: &str, loaded: &LoadedConfig, dir: PathBuf) -> Result<Outcome, CliError> {
    let out = Output::new(dir, name, loaded);
    commands::dispatch(name, &loaded.config, &out)
}
