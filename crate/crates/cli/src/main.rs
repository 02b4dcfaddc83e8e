//! `bilevel`: experiment runner for bi-level Landweber reconstructions.
//!
//! Exit status: 0 on success, 1 when the configuration is invalid, 2 when a
//! run aborts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bilevel_landweber::Error as CoreError;
use commands::Context;
use config::ConfigErrors;

#[derive(Debug, Parser)]
#[command(name = "bilevel", version, about = "Bi-level Landweber experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON); the bundled default when absent.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Replace the noise seeds by this single seed and reseed every probe.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Override `scheme.max_iter`.
    #[arg(long, global = true, value_name = "N")]
    max_iter: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Run the configured scheme at the first delta and seed.
    Run,
    /// Run every (delta, seed) pair and tabulate the results.
    Sweep,
    /// Sample the structural constants and write probes.json.
    Probe,
    /// Check the adjoint pairing and the adjoint gradient.
    CheckAdjoint,
    /// Print the configuration schema.
    Schema,
    /// Print the bundled default configuration.
    DefaultConfig,
}

enum Failure {
    Invalid(ConfigErrors),
    Abort(anyhow::Error),
}

/// Errors that stem from the user's input rather than from a run.
fn is_input_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<ConfigErrors>().is_some()
            || matches!(
                c.downcast_ref::<CoreError>(),
                Some(CoreError::Validation(_) | CoreError::Shape(_) | CoreError::Coefficient { .. })
            )
    })
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Schema => {
            print!("{}", config::SCHEMA);
            return Ok(());
        }
        Command::DefaultConfig => {
            print!("{}", config::DEFAULT_CONFIG);
            return Ok(());
        }
        _ => {}
    }
    let mut cfg = commands::load_config(cli.config.as_deref()).map_err(Failure::Invalid)?;
    cfg.apply_overrides(cli.seed, cli.max_iter, cli.out.clone());
    cfg.validate().map_err(Failure::Invalid)?;
    let ctx = Context::new(cfg).map_err(|e| {
        if is_input_error(&e) {
            Failure::Invalid(ConfigErrors(vec![format!("{e:#}")]))
        } else {
            Failure::Abort(e)
        }
    })?;
    let result = match cli.command {
        Command::Run => commands::run(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Probe => commands::probe(&ctx),
        Command::CheckAdjoint => commands::check_adjoint(&ctx),
        Command::Schema | Command::DefaultConfig => unreachable!(),
    };
    result.map_err(|e| match e.downcast::<ConfigErrors>() {
        Ok(c) => Failure::Invalid(c),
        Err(e) => Failure::Abort(e),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprint!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Abort(e)) => {
            eprintln!("error: run aborted: {e:#}");
            ExitCode::from(2)
        }
    }
}
