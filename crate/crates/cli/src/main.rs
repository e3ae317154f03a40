//! `plsmooth`: validate piecewise affine homeomorphisms, smooth them and
//! tabulate the convergence of the smoothing as the scale shrinks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Flags, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "plsmooth", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check that the mesh and its pieces form a sense-preserving PL homeomorphism.
    Validate(Flags),
    /// Build and certify the smoothing at one scale.
    Smooth(Flags),
    /// Measure Sobolev errors over a list of scales.
    Sweep(Flags),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { commands::EXIT_IO } else { 0 });
        }
    };
    let flags = match &cli.command {
        Command::Validate(f) | Command::Smooth(f) | Command::Sweep(f) => f,
    };
    let cfg = match RunConfig::resolve(flags) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(commands::EXIT_IO);
        }
    };
    if let Some(n) = cfg.workers {
        if let Err(e) = plsmooth::numeric::set_workers(n) {
            eprintln!("error: {e}");
            return ExitCode::from(commands::EXIT_IO);
        }
    }
    let code = match cli.command {
        Command::Validate(_) => commands::validate(&cfg),
        Command::Smooth(_) => commands::smooth(&cfg),
        Command::Sweep(_) => commands::sweep(&cfg),
    };
    ExitCode::from(code)
}
