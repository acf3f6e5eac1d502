//! `hkit`: batch front end for the Heisenberg-group kernel toolkit.
//!
//! Exit codes: `0` success, `1` runtime failure or failed acceptance, `2` usage or
//! configuration error.

mod bmo_cmd;
mod comm_cmd;
mod common;
mod config;
mod heat_cmd;
mod kernel_cmd;
mod sector_cmd;

use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use hkit::acceptance::{run_criterion, CriterionOutcome, LIBRARY_CRITERIA};
use serde::Serialize;

use crate::common::Ctx;
use crate::config::{ConfigArgs, ExperimentConfig};

/// Environment variable fixing the worker thread count.
const THREADS_ENV: &str = "HKIT_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "hkit",
    version,
    about = "Heat kernel, Riesz transforms and commutators on the Heisenberg group"
)]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Riesz kernel evaluation, calibration and zero scan.
    #[command(subcommand)]
    Kernel(kernel_cmd::KernelCmd),
    /// Heat kernel evaluation and checks.
    #[command(subcommand)]
    Heat(heat_cmd::HeatCmd),
    /// Twisted truncated sectors.
    #[command(subcommand)]
    Sector(sector_cmd::SectorCmd),
    /// Oscillation functionals, dyadic cubes and weights.
    #[command(subcommand)]
    Bmo(bmo_cmd::BmoCmd),
    /// Commutator experiments.
    #[command(subcommand)]
    Comm(comm_cmd::CommCmd),
    /// Test batteries.
    #[command(subcommand)]
    Suite(SuiteCmd),
    /// Configuration.
    #[command(subcommand)]
    Config(ConfigCmd),
}

#[derive(Subcommand, Debug)]
enum SuiteCmd {
    /// Run the acceptance battery; exits nonzero when a criterion fails.
    Acceptance {
        /// Criteria to run, comma separated (default: all).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

#[derive(Subcommand, Debug)]
enum ConfigCmd {
    /// Print the effective configuration (defaults, file and flags merged) as TOML.
    Show,
}

#[derive(Serialize)]
struct SuiteBody {
    passed: bool,
    criteria: Vec<CriterionOutcome>,
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("{THREADS_ENV}={v} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn suite(ctx: &Ctx, only: &[u32]) -> Result<bool> {
    let ids: Vec<u32> = if only.is_empty() {
        LIBRARY_CRITERIA.to_vec()
    } else {
        only.to_vec()
    };
    if let Some(bad) = ids.iter().find(|i| !LIBRARY_CRITERIA.contains(i)) {
        bail!("unknown criterion {bad}");
    }
    let mut criteria = Vec::new();
    for id in ids {
        let outcome = run_criterion(id, ctx.cfg.seed)?;
        eprintln!("{}", outcome.line());
        criteria.push(outcome);
    }
    let passed = criteria.iter().all(|c| c.passed);
    ctx.report(
        "suite acceptance",
        "acceptance battery",
        "default",
        SuiteBody { passed, criteria },
    )?;
    Ok(passed)
}

fn run(cli: &Cli, ctx: &Ctx) -> Result<bool> {
    match &cli.command {
        Command::Kernel(c) => kernel_cmd::run(ctx, c)?,
        Command::Heat(c) => heat_cmd::run(ctx, c)?,
        Command::Sector(c) => sector_cmd::run(ctx, c)?,
        Command::Bmo(c) => bmo_cmd::run(ctx, c)?,
        Command::Comm(c) => comm_cmd::run(ctx, c)?,
        Command::Suite(SuiteCmd::Acceptance { only }) => return suite(ctx, only),
        Command::Config(ConfigCmd::Show) => ctx.emit("config", "toml", ctx.cfg.to_toml()?.as_bytes())?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = match configure_threads()
        .and_then(|_| ExperimentConfig::resolve(&cli.config))
        .and_then(Ctx::new)
    {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match run(&cli, &ctx) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
