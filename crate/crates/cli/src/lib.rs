//! Configuration, file formats and subcommands of the `nharm` tool.

pub mod commands;
pub mod config;
pub mod io;

pub use config::RunConfig;
