//! Library half of the command-line front end: file schemas and the
//! subcommand implementations, exposed so integration tests can drive them
//! directly.

pub mod format;
pub mod run;
