//! Command-line experiments, configuration and result files for
//! `fring-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod fit;
pub mod output;
pub mod reference;

use std::time::{Instant, SystemTime};

use cli::{Cli, Command};
use commands::Summary;
use error::CliResult;
use output::OutputSet;

/// Resolves the config, runs the subcommand and writes the timing sidecar.
pub fn run(cli: &Cli) -> CliResult<Summary> {
    let cfg = cli.resolve()?;
    exec::init_threads(cli.threads);
    let mut out = OutputSet::create(&cfg.out, cli.command.name(), &cfg)?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let result = match &cli.command {
        Command::Spectrum { .. } => commands::spectrum(&cfg, &mut out),
        Command::Controllability(_) => commands::controllability(&cfg, &mut out),
        Command::QaoaRand(_) => commands::qaoa(&cfg, &mut out),
        Command::Crab { .. } => commands::crab(&cfg, &mut out),
        Command::Populations { .. } => commands::population_trace(&cfg, &mut out),
        Command::Scaling { .. } => commands::scaling(&cfg, &mut out),
        Command::GradCheck { .. } => commands::grad_check(&cfg, &mut out),
    };
    // a command that fails after writing files still gets its timing record
    if !out.written().is_empty() {
        out.sidecar(started, clock.elapsed())?;
    }
    result
}
