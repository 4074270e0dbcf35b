//! `geomppca`: sampling, densities, bridges, fits and baselines from the
//! command line. Every run writes its resolved configuration to
//! `config.json`, which `geomppca run --config` replays bitwise.

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

mod args;
mod commands;
mod config;
mod io;

/// Sizes rayon's global pool from `GEOMPPCA_THREADS` when set.
fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("GEOMPPCA_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().with_context(|| format!("GEOMPPCA_THREADS='{v}' is not a count"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: args::Cli) -> Result<()> {
    init_threads()?;
    let (cfg, out) = args::resolve(cli.command)?;
    let files = commands::execute(&cfg, &out).with_context(|| format!("{} failed", cfg.command_name()))?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(args::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
