//! Command implementations behind the `densep` binary.

pub mod args;
pub mod commands;
pub mod files;
pub mod render;

pub use args::Cli;
pub use commands::run;
