//! Command-line front end for `iadof`.
//!
//! Exit codes: `check` returns 0 for generically feasible, 1 for infeasible
//! and 2 for unknown; `certify` returns 0 when certified and 1 when every
//! sampled rank is deficient; other commands return 0 on success. Usage and
//! configuration errors return [`EXIT_USAGE`], numerical failures
//! [`EXIT_COMPUTE`] and output failures [`EXIT_IO`].

use std::ffi::OsString;
use std::fmt;
use std::io::Write;

use clap::Parser;

pub mod args;
mod commands;
pub mod config;
pub mod report;

pub const EXIT_FEASIBLE: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_UNKNOWN: i32 = 2;
pub const EXIT_USAGE: i32 = 10;
pub const EXIT_COMPUTE: i32 = 11;
pub const EXIT_IO: i32 = 12;

/// A failed run: exit code plus message for stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn compute(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_COMPUTE,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

/// Maps core errors: anything the caller could fix is a usage error.
impl From<iadof_core::Error> for Failure {
    fn from(e: iadof_core::Error) -> Self {
        use iadof_core::Error as E;
        match e {
            E::NonFinite(_) | E::RankDeficientBeamformer { .. } => Failure::compute(e.to_string()),
            _ => Failure::usage(e.to_string()),
        }
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match commands::execute(&cli) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(std::io::stderr(), "error: {f}");
            f.code
        }
    }
}
