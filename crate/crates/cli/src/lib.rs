//! The `ppgresp` command line: synthesize or convert data, train, evaluate,
//! attribute kernels and benchmark inference. Every command writes into a
//! fresh run directory with a `manifest.json`.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

use args::{Cli, Command};
use commands::Context;
use config::{pick, FileConfig};
pub use error::{CliError, Result};

pub const DEFAULT_OUT: &str = "runs";

/// Executes a parsed command line and returns the run directory.
pub fn run(cli: Cli) -> Result<PathBuf> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let out = pick(cli.out.clone(), file.out.clone(), PathBuf::from(DEFAULT_OUT));
    let jobs = pick(cli.jobs, file.jobs, 1);
    if jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let ctx = Context { file, out, jobs };
    match &cli.command {
        Command::Synth(a) => commands::synth::run(a, &ctx),
        Command::Convert(a) => commands::convert::run(a, &ctx),
        Command::Train(a) => commands::train::run(a, &ctx),
        Command::Eval(a) => commands::eval::run(a, &ctx),
        Command::Interpret(a) => commands::interpret::run(a, &ctx),
        Command::Bench(a) => commands::bench::run(a, &ctx),
    }
}

/// Parses `args` (including the program name) and runs them. Usage errors
/// come back as configuration errors.
pub fn run_args<I, T>(args: I) -> Result<PathBuf>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Config(e.to_string()))?;
    run(cli)
}
