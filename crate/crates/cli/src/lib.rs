//! Command-line driver and HTTP service over the `blockid` library.

pub mod args;
pub mod commands;
pub mod repl;
pub mod service;

use blockid::Error;

/// Error surfaced by a subcommand together with its exit code.
#[derive(Debug)]
pub enum Failure {
    Lib(Error),
    /// Training finished without meeting the gradient tolerance.
    NotConverged(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Lib(e) if e.is_validation() => 1,
            _ => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Lib(e) => write!(f, "{e}"),
            Failure::NotConverged(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

/// Runs one parsed invocation and returns the process exit code.
pub fn run(cli: args::Cli) -> i32 {
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
