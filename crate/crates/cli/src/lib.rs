//! Command-line front end for the extraction toolchain.

pub mod commands;
pub mod config;

pub use commands::Outcome;
pub use config::RunConfig;
