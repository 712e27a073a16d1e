//! `finsler`: batch runs over the structure catalog.
//!
//! Exit codes: 0 when every assertion holds, 1 when one fails, 2 for
//! configuration or runtime errors.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use finsler::distance::EvalMode;
use rayon::prelude::*;

use commands::{Outcome, RunOptions};
use config::{Operation, Scenario};

#[derive(Parser)]
#[command(name = "finsler", version, about = "Finsler structures, intrinsic distances and Lipschitz constants on grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory; overrides `output.dir` in the scenario.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overrides the scenario's evaluation mode.
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Plain,
    Essential,
}

#[derive(Subcommand)]
enum Command {
    /// F, F* and F** at the scenario's queries.
    Eval(Scenarios),
    /// Distance maps from each source, as binary and CSV.
    Distance(Scenarios),
    /// Lipschitz constants against F(x, du) at two resolutions.
    Coincide(Scenarios),
    /// Induced distances of the approximating sequence.
    Converge(Scenarios),
    /// Lists the catalog.
    Catalog,
}

#[derive(clap::Args)]
struct Scenarios {
    /// Scenario file; repeat for a batch.
    #[arg(long = "config", required = true)]
    configs: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error: cannot start {n} workers");
            return ExitCode::from(2);
        }
    }
    let (op, scenarios) = match &cli.command {
        Command::Catalog => {
            print!("{}", commands::catalog());
            return ExitCode::SUCCESS;
        }
        Command::Eval(s) => (Operation::Eval, s),
        Command::Distance(s) => (Operation::Distance, s),
        Command::Coincide(s) => (Operation::Coincide, s),
        Command::Converge(s) => (Operation::Converge, s),
    };
    let loaded: Vec<Scenario> = match scenarios.configs.iter().map(|p| config::load(p)).collect() {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Some(s) = loaded.iter().find(|s| s.config.operation != op) {
        eprintln!(
            "error: {} is a `{}` scenario, not `{}`",
            s.path.display(),
            s.config.operation.as_str(),
            op.as_str()
        );
        return ExitCode::from(2);
    }
    let opts = RunOptions {
        out: cli.out.as_deref(),
        mode: cli.mode.map(|m| match m {
            Mode::Plain => EvalMode::Plain,
            Mode::Essential => EvalMode::Essential,
        }),
    };
    let results: Vec<anyhow::Result<Outcome>> = loaded
        .par_iter()
        .map(|s| match op {
            Operation::Eval => commands::eval(s),
            Operation::Distance => commands::distance(s, &opts),
            Operation::Coincide => commands::coincide(s, &opts),
            Operation::Converge => commands::converge(s, &opts),
        })
        .collect();
    let mut code = 0u8;
    for (s, r) in loaded.iter().zip(results) {
        match r {
            Ok(o) => {
                print!("{}", o.text);
                if !o.passed {
                    eprintln!("assertion failed: {}", s.path.display());
                    code = code.max(1);
                }
            }
            Err(e) => {
                eprintln!("error: {}: {e:#}", s.path.display());
                code = 2;
            }
        }
    }
    ExitCode::from(code)
}
