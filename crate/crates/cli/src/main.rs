//! `msent`: multiscale entropy solves with oracle checks, bound reports and the
//! teacher-student temperature sweep.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod bounds;
mod experiment;
mod input;
mod solve_gaussian;
mod solve_tabular;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use input::{write_output, Source};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    MaxEntropy,
    MinRelEntropy,
    Mt,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::MaxEntropy => "max-entropy",
            Algorithm::MinRelEntropy => "min-rel-entropy",
            Algorithm::Mt => "mt",
        })
    }
}

#[derive(Parser)]
#[command(
    name = "msent",
    version,
    about = "Multiscale entropy solvers, bounds and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Verify {
    /// Check the solution against a brute-force oracle (default).
    #[arg(long, overrides_with = "no_verify")]
    verify: bool,
    /// Skip the oracle check.
    #[arg(long, overrides_with = "verify")]
    no_verify: bool,
}

impl Verify {
    fn enabled(&self) -> bool {
        !self.no_verify
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve a tabular problem; exits nonzero if the oracle disagrees.
    SolveTabular {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        verify: Verify,
    },
    /// Solve a Gaussian problem in closed form; exits nonzero if the lattice replay disagrees.
    SolveGaussian {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        verify: Verify,
    },
    /// Teacher-student sweep over alpha and sigma_1, written as CSV.
    Experiment {
        #[command(flatten)]
        io: Io,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; all cores when omitted.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Single-scale versus multiscale excess-risk bound report.
    Bounds {
        #[command(flatten)]
        io: Io,
        /// Overrides the teacher seed of a `teacher` reference.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::SolveTabular { io, verify } => {
            let (text, passed) = solve_tabular::run(&Source::read(&io.config)?, verify.enabled())?;
            write_output(io.out.as_deref(), &text)?;
            Ok(passed)
        }
        Command::SolveGaussian { io, verify } => {
            let (text, passed) = solve_gaussian::run(&Source::read(&io.config)?, verify.enabled())?;
            write_output(io.out.as_deref(), &text)?;
            Ok(passed)
        }
        Command::Experiment { io, seed, workers } => {
            experiment::run(&Source::read(&io.config)?, io.out.as_deref(), seed, workers)?;
            Ok(true)
        }
        Command::Bounds { io, seed } => {
            let text = bounds::run(&Source::read(&io.config)?, seed)?;
            write_output(io.out.as_deref(), &text)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed: solution and oracle disagree beyond tolerance");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
