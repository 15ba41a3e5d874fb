//! Command-line front end: experiment registry, config parsing, and result
//! files.

pub mod commands;
pub mod config;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{EvalSettings, ExperimentSpec, SweepSettings, REGISTRY};

/// Exit code for malformed or invalid configuration.
pub const EXIT_CONFIG: u8 = 2;
/// Exit code for failures while running an experiment.
pub const EXIT_RUNTIME: u8 = 3;
/// Exit code for an unwritable Gittins cache.
pub const EXIT_CACHE: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
    Cache(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Runtime(_) => EXIT_RUNTIME,
            Self::Cache(_) => EXIT_CACHE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "config error: {m}"),
            Self::Runtime(m) => write!(f, "runtime error: {m}"),
            Self::Cache(m) => write!(f, "cache error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<gradband_core::Error> for CliError {
    fn from(e: gradband_core::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "gradband", version, about = "Tune bandit policies on problems simulated from a prior")]
pub struct Cli {
    /// Worker threads for simulation (defaults to all cores).
    #[arg(long, global = true, env = "GRADBAND_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize the experiment's policy and evaluate it before and after.
    Train(RunArgs),
    /// Estimate the Bayes regret of the experiment's policy and its comparisons.
    Eval(RunArgs),
    /// Train and evaluate along the experiment's sweep axis.
    Sweep(RunArgs),
    /// Build Gittins indices for horizon `n` and store them.
    Gittins {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        cache: PathBuf,
    },
    /// List the bundled experiments.
    List,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Experiment file.
    #[arg(long, conflicts_with = "experiment", required_unless_present = "experiment")]
    pub config: Option<PathBuf>,
    /// Name of a bundled experiment.
    #[arg(long)]
    pub experiment: Option<String>,
    /// Overrides both the training and the evaluation seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Root of the output tree.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
}

impl RunArgs {
    pub fn load(&self) -> Result<ExperimentSpec, CliError> {
        let mut spec = match (&self.config, &self.experiment) {
            (Some(path), _) => ExperimentSpec::from_file(path)?,
            (None, Some(name)) => ExperimentSpec::from_registry(name)?,
            (None, None) => return Err(CliError::Config("pass --config or --experiment".into())),
        };
        if let Some(seed) = self.seed {
            spec.set_seed(seed);
        }
        Ok(spec)
    }
}

/// Run a parsed command line; returns the directory written to, if any.
pub fn run(cli: Cli) -> Result<Option<PathBuf>, CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    let invocation = std::env::args().collect::<Vec<_>>().join(" ");
    match cli.command {
        Command::Train(args) => commands::train(&args, &invocation).map(Some),
        Command::Eval(args) => commands::eval(&args, &invocation).map(Some),
        Command::Sweep(args) => commands::sweep(&args, &invocation).map(Some),
        Command::Gittins { n, cache } => commands::gittins(n, &cache).map(|_| None),
        Command::List => {
            for (name, _) in REGISTRY {
                println!("{name}");
            }
            Ok(None)
        }
    }
}
