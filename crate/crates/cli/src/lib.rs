//! Library surface of the experiment driver, exposed so integration tests
//! can call the subcommands in-process.

pub mod args;
pub mod commands;

use std::fmt;

/// Usage errors exit with code 2, runtime failures with code 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub(crate) fn usage_from(err: icufuse_core::Error) -> CliError {
        CliError::Usage(err.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Runtime(msg) => write!(f, "error: {msg}"),
        }
    }
}

impl From<icufuse_core::Error> for CliError {
    fn from(err: icufuse_core::Error) -> Self {
        match err {
            icufuse_core::Error::InvalidArgument(msg) => CliError::Usage(msg),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

pub fn execute(cli: args::Cli) -> CliResult<()> {
    match &cli.command {
        args::Command::Synth(a) => commands::cmd_synth(a),
        args::Command::Embed(a) => commands::cmd_embed(a),
        args::Command::Run(a) => commands::cmd_run(a),
        args::Command::Report(a) => commands::cmd_report(a),
    }
}
