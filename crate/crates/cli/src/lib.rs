//! Library side of the command-line toolkit: the experiment harnesses and
//! the subcommand implementations, kept callable so integration tests can
//! drive them directly.

pub mod commands;
pub mod harness;
pub mod logging;
