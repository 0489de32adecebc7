//! `mop`: sampling, Metamodel of Optimal Prognosis and sensitivity reports
//! from the command line.
//!
//! Exit codes: 0 success, 1 user or data error, 2 environment error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::LevelFilter;
use mop_core::error::MopError;

use config::{RunConfig, Usage};

pub const THREADS_ENV: &str = "MOP_THREADS";

#[derive(Parser, Debug)]
#[command(name = "mop", version, about = "Metamodel of Optimal Prognosis toolkit")]
struct Cli {
    /// More log output (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Worker threads (0 = all cores)
    #[arg(long, env = THREADS_ENV, global = true)]
    threads: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a sample set (CSV + JSON sidecar)
    Sample(Invocation),
    /// Run the MOP search and write reports
    Mop(Invocation),
    /// Run the MOP on growing sample counts
    Convergence(Invocation),
    /// Evaluate a serialized model on new points
    Predict(Invocation),
}

#[derive(clap::Args, Debug)]
struct Invocation {
    /// JSON run configuration; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(flatten)]
    flags: RunConfig,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 1;
    }
    match err.downcast_ref::<MopError>() {
        Some(e) if e.is_user_error() => 1,
        Some(_) => 2,
        None if err.downcast_ref::<std::io::Error>().is_some() => 2,
        None => 1,
    }
}

fn init_threads(threads: Option<&str>) -> anyhow::Result<()> {
    if let Some(raw) = threads {
        let t: usize = raw
            .trim()
            .parse()
            .map_err(|_| std::io::Error::other(format!("{THREADS_ENV} must be a thread count, got '{raw}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| std::io::Error::other(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads(cli.threads.as_deref())?;
    let (verb, inv) = match &cli.command {
        Command::Sample(i) => ("sample", i),
        Command::Mop(i) => ("mop", i),
        Command::Convergence(i) => ("convergence", i),
        Command::Predict(i) => ("predict", i),
    };
    let cfg = match &inv.config {
        Some(p) => RunConfig::load(p)?.overlay(&inv.flags),
        None => inv.flags.clone(),
    };
    match verb {
        "sample" => commands::sample(&cfg),
        "mop" => commands::mop(&cfg),
        "convergence" => commands::convergence(&cfg),
        _ => commands::predict(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
