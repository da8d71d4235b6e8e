//! Library side of the `voxanon` binary: argument definitions, the run
//! configuration, subcommand implementations and the toy fixture generator.

pub mod cli;
pub mod commands;
pub mod config;
pub mod fixture;
pub mod output;

use std::fmt;

pub use cli::Cli;
pub use config::RunConfig;

/// Bad flags, config keys or values.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A violated internal invariant.
#[derive(Debug)]
pub struct InternalError(pub String);

impl fmt::Display for InternalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "internal error: {}", self.0)
    }
}

impl std::error::Error for InternalError {}

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

/// Exit status for a failed run.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause.is::<InternalError>() {
            return EXIT_INTERNAL;
        }
        if let Some(e) = cause.downcast_ref::<voxanon_core::Error>() {
            return match e {
                voxanon_core::Error::InvalidParameter { .. }
                | voxanon_core::Error::MissingAnonymizer(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            };
        }
    }
    EXIT_DATA
}
