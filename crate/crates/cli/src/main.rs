//! `hcd`: generate sparse-recovery instances, solve them, sweep solver
//! parameters and benchmark against the baselines.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 solver cap reached under `--strict`.

mod commands;
mod config;
mod io;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hcd::HcdError;

use crate::commands::StrictCapWarning;
use crate::config::{usage, CommonArgs, ExperimentConfig, SweepParam, SweepSpec, UsageError};

#[derive(Debug, Parser)]
#[command(name = "hcd", version, about = "Homotopy coordinate descent for l0-regularized least squares")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic instance: dictionary, signal, truth and manifest.
    Gen(CommonArgs),
    /// Solve one instance and write solution, metrics and trace.
    Solve(CommonArgs),
    /// Solve over a list of lambda_tgt or eta values.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        param: Option<SweepParam>,
        /// Comma-separated values of the swept parameter.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Run each method over many seeded trials and aggregate the metrics.
    Bench(CommonArgs),
    /// Compare solvers against the exhaustive oracle on small instances.
    OracleCheck(CommonArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen(a) => commands::gen(&ExperimentConfig::resolve(&a)?),
        Command::Solve(a) => commands::solve(&ExperimentConfig::resolve(&a)?),
        Command::Bench(a) => commands::bench(&ExperimentConfig::resolve(&a)?),
        Command::OracleCheck(a) => commands::oracle_check(&ExperimentConfig::resolve(&a)?),
        Command::Sweep { common, param, values } => {
            let cfg = ExperimentConfig::resolve(&common)?;
            let spec = match (param, values, &cfg.sweep) {
                (Some(param), Some(values), _) => SweepSpec { param, values },
                (param, values, Some(s)) => SweepSpec {
                    param: param.unwrap_or(s.param),
                    values: values.unwrap_or_else(|| s.values.clone()),
                },
                _ => return Err(usage("sweep needs --param and --values (or a `sweep` config entry)")),
            };
            commands::sweep(&cfg, &spec)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<StrictCapWarning>() {
            return 3;
        }
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<HcdError>() {
            return match e {
                HcdError::InvalidParameter(_)
                | HcdError::BudgetExceeded { .. }
                | HcdError::PatchTooLarge { .. } => 1,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
