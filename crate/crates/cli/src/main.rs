mod commands;
mod config;
mod output;
mod verify;

use clap::Parser;
use config::{Cli, RunConfig};
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Kernel(#[from] orthogreen::kernels::KernelError),
    #[error(transparent)]
    Lattice(#[from] orthogreen::lattice::LatticeError),
    #[error(transparent)]
    Quat(#[from] orthogreen::quat::QuatError),
    #[error(transparent)]
    Green(#[from] orthogreen::green::GreenError),
    #[error(transparent)]
    QSpace(#[from] orthogreen::qspace::QSpaceError),
    #[error(transparent)]
    SpecFun(#[from] orthogreen::specfun::SpecFunError),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Outcome of a command: the report was written and its checks either all
/// held or some failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

fn run(cli: Cli) -> Result<Verdict> {
    let cfg = RunConfig::resolve(cli)?;
    let (report, verdict) = commands::dispatch(&cfg)?;
    output::write(&cfg, &report)?;
    Ok(verdict)
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
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
